#include "cradmap/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <random>
#include <set>

#include "cradmap/error.hpp"
#include "cradmap/random.hpp"

namespace cradmap::net {

void NetworkProfile::validate() const {
  if (!(capacity_mbps > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "profile '" + name + "': capacity must be positive");
  }
  if (base_latency_ms < 0.0 || jitter_ms < 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "profile '" + name + "': latency and jitter must be nonnegative");
  }
}

NetworkProfile wifi_5ghz_profile() {
  NetworkProfile p;
  p.name = "wifi-5ghz";
  p.capacity_mbps = 90.0;
  p.base_latency_ms = 21.0;
  p.jitter_ms = 13.0;
  p.metadata = {{"standard", "IEEE 802.11 (802.1X auth)"}, {"band", "5 GHz"}};
  return p;
}

NetworkProfile five_g_band78_profile() {
  NetworkProfile p;
  p.name = "5g-band78";
  p.capacity_mbps = 110.0;
  p.base_latency_ms = 24.0;
  p.jitter_ms = 4.0;
  p.metadata = {{"band", "78"},
                {"band_name", "TD 3500"},
                {"mode", "TDD"},
                {"raster_khz", "15, 30"},
                {"low_mhz", "3300"},
                {"middle_mhz", "3550"},
                {"high_mhz", "3800"},
                {"dl_ul_bandwidth_mhz", "500"}};
  return p;
}

NetworkProfile profile_by_name(std::string_view name) {
  if (name == "wifi-5ghz" || name == "wifi") return wifi_5ghz_profile();
  if (name == "5g-band78" || name == "5g") return five_g_band78_profile();
  throw Error(ErrorCode::kInvalidArgument,
              "unknown network profile '" + std::string(name) + "'");
}

double per_robot_bandwidth(double rgb_fps, double rgb_bytes, double depth_fps,
                           double depth_bytes) {
  if (rgb_fps < 0.0 || rgb_bytes < 0.0 || depth_fps < 0.0 || depth_bytes < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "stream rates and sizes must be nonnegative");
  }
  const double bits_per_second = rgb_fps * rgb_bytes * 8.0 + depth_fps * depth_bytes * 8.0;
  return bits_per_second / 1e6;
}

BandwidthTotal total_bandwidth(std::span<const double> per_robot_mbps,
                               double capacity_mbps) {
  BandwidthTotal out;
  for (const double b : per_robot_mbps) out.total_mbps += b;
  out.feasible = out.total_mbps <= capacity_mbps;
  return out;
}

double map_update_frequency(double effective_uplink_mbps, double data_per_update_mb) {
  if (!(data_per_update_mb > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "data per update must be positive");
  }
  if (std::isinf(data_per_update_mb)) return 0.0;
  return effective_uplink_mbps / data_per_update_mb;
}

double effective_uplink_per_robot(const NetworkProfile& profile, int robots,
                                  double demand_mbps) {
  if (robots < 1) throw Error(ErrorCode::kInvalidArgument, "robot count must be >= 1");
  return std::min(demand_mbps, profile.capacity_mbps / robots);
}

Submission submission_for(const Keyframe& keyframe) {
  return Submission{keyframe.robot_id, keyframe.keyframe_id, keyframe.timestamp,
                    static_cast<double>(keyframe.payload_bits())};
}

Schedule simulate_channel(std::span<const Submission> submissions,
                          const NetworkProfile& profile, std::uint64_t rng_seed) {
  profile.validate();
  std::vector<Submission> subs(submissions.begin(), submissions.end());
  for (const Submission& s : subs) {
    if (!(s.payload_bits >= 0.0) || !std::isfinite(s.send_time) || s.send_time < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "submission has invalid payload or time");
    }
  }
  std::stable_sort(subs.begin(), subs.end(), [](const Submission& a, const Submission& b) {
    if (a.send_time != b.send_time) return a.send_time < b.send_time;
    if (a.robot_id != b.robot_id) return a.robot_id < b.robot_id;
    return a.keyframe_id < b.keyframe_id;
  });

  const double capacity_bps = profile.capacity_mbps * 1e6;
  std::map<int, std::deque<std::size_t>> queues;
  std::vector<double> remaining(subs.size());
  for (std::size_t i = 0; i < subs.size(); ++i) remaining[i] = subs[i].payload_bits;

  Schedule schedule;
  std::vector<double> serialized(subs.size(), 0.0);
  std::size_t next = 0;
  double now = subs.empty() ? 0.0 : subs.front().send_time;

  const auto admit = [&] {
    while (next < subs.size() && subs[next].send_time <= now) {
      queues[subs[next].robot_id].push_back(next);
      ++next;
    }
  };
  const auto active = [&] {
    std::vector<int> ids;
    for (const auto& [robot, q] : queues) {
      if (!q.empty()) ids.push_back(robot);
    }
    return ids;
  };

  admit();
  for (;;) {
    const std::vector<int> senders = active();
    if (senders.empty()) {
      if (next >= subs.size()) break;
      now = subs[next].send_time;
      admit();
      continue;
    }
    const double rate = capacity_bps / static_cast<double>(senders.size());
    double min_remaining = std::numeric_limits<double>::infinity();
    for (const int robot : senders) {
      min_remaining = std::min(min_remaining, remaining[queues[robot].front()]);
    }
    const double t_complete = now + min_remaining / rate;
    const double t_arrival = next < subs.size() ? subs[next].send_time
                                                : std::numeric_limits<double>::infinity();

    if (t_arrival < t_complete) {
      const double served = rate * (t_arrival - now);
      for (const int robot : senders) remaining[queues[robot].front()] -= served;
      schedule.segments.push_back({now, t_arrival, senders, rate});
      now = t_arrival;
    } else {
      for (const int robot : senders) {
        std::size_t& head = queues[robot].front();
        if (remaining[head] <= min_remaining) {
          remaining[head] = 0.0;
          serialized[head] = t_complete;
          queues[robot].pop_front();
        } else {
          remaining[head] -= min_remaining;
        }
      }
      schedule.segments.push_back({now, t_complete, senders, rate});
      now = t_complete;
    }
    admit();
  }

  std::map<int, double> last_arrival;
  schedule.events.reserve(subs.size());
  // Events are finalized per robot in FIFO order so jitter never reorders a
  // robot's deliveries.
  for (std::size_t i = 0; i < subs.size(); ++i) {
    const Submission& s = subs[i];
    double jitter_ms = 0.0;
    if (profile.jitter_ms > 0.0) {
      std::mt19937_64 rng(derive_seed(rng_seed, {static_cast<std::uint64_t>(s.robot_id),
                                                 static_cast<std::uint64_t>(s.keyframe_id)}));
      jitter_ms = std::uniform_real_distribution<double>(-profile.jitter_ms,
                                                         profile.jitter_ms)(rng);
    }
    double arrival = serialized[i] + (profile.base_latency_ms + jitter_ms) * 1e-3;
    if (auto it = last_arrival.find(s.robot_id); it != last_arrival.end()) {
      arrival = std::max(arrival, it->second);
    }
    last_arrival[s.robot_id] = arrival;
    schedule.events.push_back(TransmissionEvent{s.robot_id, s.keyframe_id, s.send_time,
                                                s.payload_bits, serialized[i], arrival});
  }
  std::stable_sort(schedule.events.begin(), schedule.events.end(),
                   [](const TransmissionEvent& a, const TransmissionEvent& b) {
                     if (a.arrival_time != b.arrival_time) return a.arrival_time < b.arrival_time;
                     if (a.robot_id != b.robot_id) return a.robot_id < b.robot_id;
                     return a.keyframe_id < b.keyframe_id;
                   });
  return schedule;
}

std::vector<TransmissionEvent> transmit(std::span<const Submission> submissions,
                                        const NetworkProfile& profile,
                                        std::uint64_t rng_seed) {
  return simulate_channel(submissions, profile, rng_seed).events;
}

Channel::Channel(NetworkProfile profile, std::uint64_t rng_seed)
    : profile_(std::move(profile)), rng_seed_(rng_seed) {
  profile_.validate();
}

Schedule Channel::run() const { return simulate_channel(submissions_, profile_, rng_seed_); }

std::map<int, double> achieved_update_frequency(std::span<const TransmissionEvent> events) {
  std::map<int, std::vector<double>> arrivals;
  for (const TransmissionEvent& e : events) arrivals[e.robot_id].push_back(e.arrival_time);
  for (auto& [robot, times] : arrivals) std::sort(times.begin(), times.end());

  std::map<int, double> out;
  double window_start = -std::numeric_limits<double>::infinity();
  double window_end = std::numeric_limits<double>::infinity();
  for (const auto& [robot, times] : arrivals) {
    window_start = std::max(window_start, times.front());
    window_end = std::min(window_end, times.back());
  }
  const bool shared_window = arrivals.size() > 1 && window_end > window_start;
  for (const auto& [robot, times] : arrivals) {
    if (shared_window) {
      const auto count = std::count_if(times.begin(), times.end(), [&](double t) {
        return t > window_start && t <= window_end;
      });
      out[robot] = static_cast<double>(count) / (window_end - window_start);
    } else if (times.size() >= 2 && times.back() > times.front()) {
      out[robot] = static_cast<double>(times.size() - 1) / (times.back() - times.front());
    } else {
      out[robot] = 0.0;
    }
  }
  return out;
}

void write_events_csv(std::ostream& out, std::span<const TransmissionEvent> events) {
  out << "robot_id,keyframe_id,send_time,arrival_time,payload_bits\n";
  char line[160];
  for (const TransmissionEvent& e : events) {
    std::snprintf(line, sizeof(line), "%d,%d,%.9f,%.9f,%.0f\n", e.robot_id, e.keyframe_id,
                  e.send_time, e.arrival_time, e.payload_bits);
    out << line;
  }
}

}  // namespace cradmap::net
