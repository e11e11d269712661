#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

#include "vrsim/core.hpp"
#include "vrsim/rng.hpp"

namespace vrsim {

using Cx = std::complex<double>;
using CxVec = std::vector<Cx>;

/// Per-slot fading. Raw entries are unit-variance CN(0,1); the path-loss
/// scaling is applied on access so the same draw can serve either the
/// multicast (alpha) or unicast (beta) exponent.
struct ChannelRealization {
  int slot = 0;
  int users = 0;
  int mecs = 0;
  int antennas = 0;
  std::vector<Cx> raw;                 // users x mecs x antennas
  std::vector<double> distances;      // users x mecs, m, floored at 1

  static ChannelRealization sample(const NetworkTopology& topo, int slot, Rng& rng) {
    ChannelRealization ch;
    ch.slot = slot;
    ch.users = topo.user_count();
    ch.mecs = topo.mec_count();
    ch.antennas = topo.mecs.at(0).antennas;
    ch.raw.resize(static_cast<std::size_t>(ch.users) * ch.mecs * ch.antennas);
    ch.distances.resize(static_cast<std::size_t>(ch.users) * ch.mecs);
    for (int k = 0; k < ch.users; ++k)
      for (int b = 0; b < ch.mecs; ++b) {
        ch.distances[k * ch.mecs + b] = std::max(topo.user_mec_distance(k, b), 1.0);
        for (int a = 0; a < ch.antennas; ++a)
          ch.raw[(static_cast<std::size_t>(k) * ch.mecs + b) * ch.antennas + a] = rng.cnormal(1.0);
      }
    return ch;
  }

  double gain(int user, int mec, double exponent, const PhyParams& phy) const {
    if (phy.literal_fading) return exponent;  // constant-variance mode
    return std::pow(distances[user * mecs + mec], -exponent);
  }

  /// Faded channel vector for (user, mec) under the given path-loss exponent.
  CxVec faded(int user, int mec, double exponent, const PhyParams& phy) const {
    const double s = std::sqrt(gain(user, mec, exponent, phy));
    CxVec v(antennas);
    const std::size_t base = (static_cast<std::size_t>(user) * mecs + mec) * antennas;
    for (int a = 0; a < antennas; ++a) v[a] = s * raw[base + a];
    return v;
  }
};

inline Cx inner(const CxVec& a, const CxVec& b) {
  // a^H b
  Cx s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

inline double norm2(const CxVec& a) {
  double s = 0.0;
  for (const Cx& c : a) s += std::norm(c);
  return s;
}

/// Maximum-ratio style precoder: sqrt(power) times the normalized mean of the
/// member channels. Singleton groups reduce to plain MRT.
inline CxVec mrt_precoder(const std::vector<CxVec>& group_channels, double power) {
  if (group_channels.empty()) throw std::invalid_argument("mrt_precoder: empty group");
  const std::size_t n = group_channels.front().size();
  CxVec u(n, 0.0);
  for (const CxVec& h : group_channels)
    for (std::size_t i = 0; i < n; ++i) u[i] += h[i];
  for (Cx& c : u) c /= static_cast<double>(group_channels.size());
  double nu = std::sqrt(norm2(u));
  if (nu == 0.0) {
    // probability-zero fallback
    std::fill(u.begin(), u.end(), Cx{1.0, 0.0});
    nu = std::sqrt(static_cast<double>(n));
  }
  const double scale = std::sqrt(power) / nu;
  for (Cx& c : u) c *= scale;
  return u;
}

/// One active downlink group: the users of one MEC sharing one FoV.
struct TxGroup {
  int mec = 0;
  bool multicast = false;  // >= 2 members
  int fov = 0;
  std::vector<int> users;
  CxVec precoder;
};

namespace detail {
// Receiving user's channel to an arbitrary MEC, with the exponent picked by
// the user's own role.
inline CxVec user_channel(const ChannelRealization& ch, const PhyParams& phy, int user,
                          int mec, bool user_is_multicast) {
  const double e = user_is_multicast ? phy.pathloss_exponent_mul : phy.pathloss_exponent_uni;
  return ch.faded(user, mec, e, phy);
}

// Interference sums over every other group and, per the model, over each of
// its members (a group of size n contributes n identical terms).
inline double interference(int user, std::size_t own_group, const std::vector<TxGroup>& groups,
                           const ChannelRealization& ch, const PhyParams& phy,
                           bool user_is_multicast) {
  double sum = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (g == own_group) continue;
    const CxVec hk = user_channel(ch, phy, user, groups[g].mec, user_is_multicast);
    const double term = std::norm(inner(hk, groups[g].precoder));
    sum += term * static_cast<double>(groups[g].users.size());
  }
  return sum;
}
}  // namespace detail

inline double multicast_sinr(int user, std::size_t group, const std::vector<TxGroup>& groups,
                             const ChannelRealization& ch, const PhyParams& phy) {
  const TxGroup& g = groups.at(group);
  const CxVec h = detail::user_channel(ch, phy, user, g.mec, true);
  const double signal = std::norm(inner(h, g.precoder));
  const double interf = detail::interference(user, group, groups, ch, phy, true);
  return signal / (interf + phy.noise_power);
}

inline double unicast_sinr(int user, std::size_t group, const std::vector<TxGroup>& groups,
                           const ChannelRealization& ch, const PhyParams& phy) {
  const TxGroup& g = groups.at(group);
  const CxVec h = detail::user_channel(ch, phy, user, g.mec, false);
  const double signal = std::norm(inner(h, g.precoder));
  const double interf = detail::interference(user, group, groups, ch, phy, false);
  return signal / (interf + phy.noise_power);
}

inline double sinr_for(int user, std::size_t group, const std::vector<TxGroup>& groups,
                       const ChannelRealization& ch, const PhyParams& phy) {
  return groups.at(group).multicast ? multicast_sinr(user, group, groups, ch, phy)
                                    : unicast_sinr(user, group, groups, ch, phy);
}

inline double rate(double sinr, const PhyParams& phy) {
  if (sinr < 0.0) throw std::invalid_argument("rate: sinr must be nonnegative");
  return phy.bandwidth * std::log2(1.0 + sinr);
}

}  // namespace vrsim
