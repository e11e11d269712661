#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "vrsim/core.hpp"

namespace vrsim {

/// Stand-in for an unbounded latency (e.g. zero downlink rate); finite so
/// sums stay well-defined. Always a QoE failure downstream.
inline constexpr double kLatencySentinel = 1e9;

enum class Scheme { MecNoMigration, MecMigration, VrDevice };

/// Rendering role within the migration scheme.
enum class RenderRole { RendersItself, ReceivesMigration };

struct LatencyBreakdown {
  double uplink = 0.0;
  double render = 0.0;
  double migration = 0.0;
  double downlink = 0.0;
  double total = 0.0;
};

/// FoV payload C = 48 R^2 bits (RGB, 8 bits/channel, two viewpoints).
inline double fov_bits(const RenderingParams& p) {
  if (p.resolution <= 0.0) throw std::invalid_argument("fov_bits: resolution must be positive");
  return 3.0 * p.bits_per_pixel * p.viewpoints * p.resolution * p.resolution;
}

/// Stitched 2D image M = 4/3 C = 64 R^2 bits.
inline double stitched_bits(const RenderingParams& p) { return fov_bits(p) * 4.0 / 3.0; }

inline double render_time(double bits, double cycles_per_bit, double compute) {
  return cycles_per_bit * bits / compute;
}

inline double migration_time(double fiber_distance, double fiber_rate) {
  return fiber_distance / fiber_rate;
}

inline double downlink_time(double bits, double compression_ratio, double rate) {
  if (rate <= 0.0) return kLatencySentinel;
  return bits / (compression_ratio * rate);
}

struct LatencyInputs {
  const RenderingParams* params = nullptr;
  double downlink_rate = 0.0;          // bits/s for this user
  double render_cycles_per_bit = 0.0;  // of the rendering MEC (or VR device)
  double render_compute = 0.0;         // cycles/s of the rendering MEC (or VR device)
  double fiber_distance = 0.0;         // serving-to-rendering MEC, m
  double fiber_rate = 0.0;             // bits/s
};

/// Composes the end-to-end interaction latency for one user under the given
/// scheme. Prediction zeroes the uplink term; the migration role only exists
/// under the migration scheme.
inline LatencyBreakdown interaction_latency(Scheme scheme, bool predicted, RenderRole role,
                                            const LatencyInputs& in) {
  if (in.params == nullptr) throw std::invalid_argument("interaction_latency: missing params");
  if (role == RenderRole::ReceivesMigration && scheme != Scheme::MecMigration)
    throw std::invalid_argument("interaction_latency: migration role requires the migration scheme");
  const RenderingParams& p = *in.params;
  LatencyBreakdown out;
  out.uplink = predicted ? 0.0 : p.uplink_latency;
  switch (scheme) {
    case Scheme::MecNoMigration:
    case Scheme::MecMigration:
      out.render = render_time(stitched_bits(p), in.render_cycles_per_bit, in.render_compute);
      out.downlink = downlink_time(fov_bits(p), p.compression_ratio, in.downlink_rate);
      if (scheme == Scheme::MecMigration && role == RenderRole::ReceivesMigration)
        out.migration = migration_time(in.fiber_distance, in.fiber_rate);
      break;
    case Scheme::VrDevice:
      out.downlink = downlink_time(stitched_bits(p), p.compression_ratio, in.downlink_rate);
      out.render = render_time(stitched_bits(p), in.render_cycles_per_bit, in.render_compute);
      break;
  }
  out.total = out.uplink + out.render + out.migration + out.downlink;
  return out;
}

struct QoeSample {
  double mse = 0.0;   // {0,1}
  double psnr = 0.0;  // dB
  double delta = 1.0;
};

/// Threshold-gated PSNR: on-time delivery (total <= threshold, inclusive)
/// gives MSE 0, otherwise MSE 1.
inline QoeSample psnr(double total_latency, double threshold, double delta = 1.0) {
  QoeSample q;
  q.delta = delta;
  const bool on_time = total_latency <= threshold;
  q.mse = on_time ? 0.0 : 1.0;
  q.psnr = 10.0 * std::log10((1.0 + delta) / (q.mse + delta));
  return q;
}

/// PSNR of an on-time slot with the default delta.
inline double psnr_success() { return 10.0 * std::log10(2.0); }

/// Exact-match fraction, reported as a percentage.
inline double prediction_accuracy(const std::vector<int>& actual, const std::vector<int>& predicted) {
  if (actual.size() != predicted.size()) throw std::invalid_argument("prediction_accuracy: length mismatch");
  if (actual.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t t = 0; t < actual.size(); ++t)
    if (actual[t] == predicted[t]) ++hits;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(actual.size());
}

/// Diagnostic only: the normalized-difference average with 1-based indices.
/// Evaluates to ~0 for perfect prediction, which is why the reported metric
/// is the exact-match fraction above.
inline double prediction_accuracy_literal(const std::vector<int>& actual,
                                          const std::vector<int>& predicted) {
  if (actual.size() != predicted.size()) throw std::invalid_argument("prediction_accuracy_literal: length mismatch");
  if (actual.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t t = 0; t < actual.size(); ++t)
    sum += static_cast<double>(actual[t] - predicted[t]) / static_cast<double>(actual[t] + 1);
  return 100.0 * sum / static_cast<double>(actual.size());
}

}  // namespace vrsim
