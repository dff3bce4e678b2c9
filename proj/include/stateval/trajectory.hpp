#pragma once

// Trajectory data model, TUM text I/O, timestamp association, and the
// bridge from trajectories to Chebyshev fits (translation fitting, velocity
// synthesis, and a compact binary fit format).

#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <utility>
#include <vector>

#include "stateval/chebyshev.hpp"
#include "stateval/error.hpp"
#include "stateval/liegroups.hpp"

namespace stateval {

struct StampedState {
  double t = 0.0;
  ExtendedPose state;
};

/// Time-ordered sequence of extended poses. `has_velocity` records whether
/// the velocity fields carry data; when false they are zero.
class Trajectory {
 public:
  Trajectory() = default;

  Trajectory(std::vector<StampedState> states, bool has_velocity)
      : states_(std::move(states)), has_velocity_(has_velocity) {
    for (std::size_t i = 0; i < states_.size(); ++i) {
      if (!std::isfinite(states_[i].t)) {
        throw Error(ErrorCode::InvalidArgument, "non-finite timestamp at index " + std::to_string(i));
      }
      if (i > 0 && !(states_[i].t > states_[i - 1].t)) {
        throw Error(ErrorCode::NonMonotoneTime,
                    "timestamps must be strictly increasing (index " + std::to_string(i) + ")");
      }
    }
    if (!has_velocity_) {
      for (auto& s : states_) s.state.velocity.setZero();
    }
  }

  std::size_t size() const noexcept { return states_.size(); }
  bool empty() const noexcept { return states_.empty(); }
  bool has_velocity() const noexcept { return has_velocity_; }

  const StampedState& operator[](std::size_t i) const { return states_[i]; }
  const std::vector<StampedState>& states() const noexcept { return states_; }
  auto begin() const noexcept { return states_.begin(); }
  auto end() const noexcept { return states_.end(); }

  std::vector<double> times() const {
    std::vector<double> t;
    t.reserve(states_.size());
    for (const auto& s : states_) t.push_back(s.t);
    return t;
  }

  /// size() x 3 matrix of translations.
  MatrixXd translations() const {
    MatrixXd p(static_cast<Eigen::Index>(states_.size()), 3);
    for (std::size_t i = 0; i < states_.size(); ++i) {
      p.row(static_cast<Eigen::Index>(i)) = states_[i].state.translation.transpose();
    }
    return p;
  }

  /// Copy with velocities replaced by the rows of `v` (size() x 3).
  Trajectory with_velocities(const MatrixXd& v) const {
    if (v.rows() != static_cast<Eigen::Index>(states_.size()) || v.cols() != 3) {
      throw Error(ErrorCode::InvalidArgument, "velocity matrix must be size() x 3");
    }
    std::vector<StampedState> out = states_;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i].state.velocity = v.row(static_cast<Eigen::Index>(i)).transpose();
    }
    return {std::move(out), true};
  }

 private:
  std::vector<StampedState> states_;
  bool has_velocity_ = false;
};

// TUM text format

enum class VelocityColumns {
  Absent,   // t tx ty tz qx qy qz qw
  Present,  // t tx ty tz qx qy qz qw vx vy vz
  Detect,   // decided by the first data line
};

/// Tolerated deviation of ||q|| from 1 before a quaternion is rejected.
inline constexpr double kQuaternionNormTolerance = 1e-3;

/// Timestamps above this are taken to be integer nanoseconds.
inline constexpr double kNanosecondThreshold = 1e12;

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view token) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

/// Integer nanosecond stamps are split before conversion so that the
/// sub-second part keeps full double precision.
inline std::optional<double> parse_timestamp(std::string_view token, bool& was_nanoseconds) {
  was_nanoseconds = false;
  if (!token.empty() && std::all_of(token.begin(), token.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    std::uint64_t ns = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), ns);
    if (ec == std::errc() && ptr == token.data() + token.size() &&
        static_cast<double>(ns) > kNanosecondThreshold) {
      was_nanoseconds = true;
      return static_cast<double>(ns / 1000000000ULL) + static_cast<double>(ns % 1000000000ULL) * 1e-9;
    }
  }
  auto v = parse_double(token);
  if (v && *v > kNanosecondThreshold) {
    was_nanoseconds = true;
    *v /= 1e9;
  }
  return v;
}

inline void append_fixed(std::string& out, double v) {
  if (std::abs(v) < 5e-10) v = 0.0;  // no "-0.000000000"
  char buf[64];
  const int n = std::snprintf(buf, sizeof(buf), "%.9f", v);
  out.append(buf, static_cast<std::size_t>(n));
}

/// The value a nine-decimal field reads back as.
inline double fixed9(double v) {
  std::string s;
  append_fixed(s, v);
  return std::strtod(s.c_str(), nullptr);
}

inline Eigen::Quaterniond fixed9(const Eigen::Quaterniond& q) {
  return {fixed9(q.w()), fixed9(q.x()), fixed9(q.y()), fixed9(q.z())};
}

/// Quaternion whose nine-decimal text maps back to itself through
/// parse (normalize) and write, so rewriting a file is byte-stable.
inline Eigen::Quaterniond stable_quaternion(const Rotation& r) {
  Eigen::Quaterniond printed = fixed9(r.quaternion());
  for (int iter = 0; iter < 8; ++iter) {
    const Eigen::Quaterniond again = fixed9(Rotation::from_quaternion(printed).quaternion());
    if (again.coeffs() == printed.coeffs()) break;
    printed = again;
  }
  return printed;
}

}  // namespace detail

/// Parses TUM lines `t tx ty tz qx qy qz qw [vx vy vz]`. Blank lines and
/// lines starting with '#' are skipped. Quaternions are Hamilton, scalar
/// last, and are normalized on read. Warnings (e.g. nanosecond timestamps)
/// are appended to `warnings` when given.
inline Trajectory parse_tum(std::string_view text, VelocityColumns columns,
                            std::vector<std::string>* warnings = nullptr) {
  std::vector<StampedState> states;
  std::optional<bool> with_velocity;
  if (columns == VelocityColumns::Absent) with_velocity = false;
  if (columns == VelocityColumns::Present) with_velocity = true;
  bool warned_ns = false;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
    ++line_no;

    const auto fields = detail::split_fields(line);
    if (fields.empty() || fields.front().front() == '#') continue;

    if (!with_velocity.has_value()) {
      if (fields.size() == 8) with_velocity = false;
      else if (fields.size() == 11) with_velocity = true;
      else throw Error(ErrorCode::MalformedLine, "expected 8 or 11 fields, got " + std::to_string(fields.size()), line_no);
    }
    const std::size_t expected = *with_velocity ? 11 : 8;
    if (fields.size() != expected) {
      throw Error(ErrorCode::MalformedLine,
                  "expected " + std::to_string(expected) + " fields, got " + std::to_string(fields.size()),
                  line_no);
    }

    bool ns = false;
    const auto t = detail::parse_timestamp(fields[0], ns);
    if (!t) throw Error(ErrorCode::MalformedLine, "bad timestamp '" + std::string(fields[0]) + "'", line_no);
    if (ns && !warned_ns && warnings) {
      warnings->push_back("timestamps look like integer nanoseconds; converted to seconds");
      warned_ns = true;
    }

    double v[10];
    for (std::size_t k = 1; k < expected; ++k) {
      const auto x = detail::parse_double(fields[k]);
      if (!x) throw Error(ErrorCode::MalformedLine, "bad number '" + std::string(fields[k]) + "'", line_no);
      v[k - 1] = *x;
    }

    const Eigen::Quaterniond q(v[6], v[3], v[4], v[5]);
    if (std::abs(q.norm() - 1.0) > kQuaternionNormTolerance) {
      throw Error(ErrorCode::DenormalizedQuaternion, "|q| = " + std::to_string(q.norm()), line_no);
    }
    if (!states.empty() && !(*t > states.back().t)) {
      throw Error(ErrorCode::NonMonotoneTime, "timestamp does not increase", line_no);
    }

    StampedState s;
    s.t = *t;
    s.state.rotation = Rotation::from_quaternion(q);
    s.state.translation = Vector3(v[0], v[1], v[2]);
    if (*with_velocity) s.state.velocity = Vector3(v[7], v[8], v[9]);
    states.push_back(s);
  }
  return {std::move(states), with_velocity.value_or(columns == VelocityColumns::Present)};
}

inline Trajectory parse_tum(std::string_view text, bool with_velocity) {
  return parse_tum(text, with_velocity ? VelocityColumns::Present : VelocityColumns::Absent);
}

/// Fixed nine-decimal TUM text; velocity columns are written when the
/// trajectory has them.
inline std::string write_tum(const Trajectory& traj) {
  std::string out = traj.has_velocity() ? "# timestamp tx ty tz qx qy qz qw vx vy vz\n"
                                        : "# timestamp tx ty tz qx qy qz qw\n";
  for (const auto& s : traj) {
    const Eigen::Quaterniond q = detail::stable_quaternion(s.state.rotation);
    const double fields[] = {s.t,
                             s.state.translation.x(), s.state.translation.y(), s.state.translation.z(),
                             q.x(), q.y(), q.z(), q.w(),
                             s.state.velocity.x(), s.state.velocity.y(), s.state.velocity.z()};
    const std::size_t count = traj.has_velocity() ? 11 : 8;
    for (std::size_t k = 0; k < count; ++k) {
      if (k > 0) out.push_back(' ');
      detail::append_fixed(out, fields[k]);
    }
    out.push_back('\n');
  }
  return out;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path + "'");
}

inline Trajectory load_tum(const std::string& path, VelocityColumns columns = VelocityColumns::Detect,
                           std::vector<std::string>* warnings = nullptr) {
  return parse_tum(read_text_file(path), columns, warnings);
}

// Association

struct IndexPair {
  std::size_t est = 0;
  std::size_t ref = 0;
  bool operator==(const IndexPair&) const = default;
};

struct AssociationPairing {
  std::vector<IndexPair> pairs;
  double max_diff = 0.0;

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }
};

inline constexpr double kDefaultMaxDiff = 0.01;

/// Greedy one-to-one nearest-timestamp matching: candidate pairs within
/// `max_diff` are taken in order of increasing time gap. Result is sorted by
/// estimate time.
inline AssociationPairing associate(const Trajectory& est, const Trajectory& ref,
                                    double max_diff = kDefaultMaxDiff) {
  if (est.empty() || ref.empty()) throw Error(ErrorCode::NoOverlap, "empty trajectory");
  if (!(max_diff >= 0.0) || !std::isfinite(max_diff)) {
    throw Error(ErrorCode::InvalidArgument, "max_diff must be finite and non-negative");
  }
  const std::vector<double> rt = ref.times();

  struct Candidate {
    double gap;
    std::size_t est;
    std::size_t ref;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double t = est[i].t;
    auto it = std::lower_bound(rt.begin(), rt.end(), t - max_diff);
    for (; it != rt.end() && *it <= t + max_diff; ++it) {
      const double gap = std::abs(*it - t);
      if (gap <= max_diff) candidates.push_back({gap, i, static_cast<std::size_t>(it - rt.begin())});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.gap, a.est, a.ref) < std::tie(b.gap, b.est, b.ref);
  });

  std::vector<char> est_used(est.size(), 0);
  std::vector<char> ref_used(ref.size(), 0);
  AssociationPairing out;
  out.max_diff = max_diff;
  for (const auto& c : candidates) {
    if (est_used[c.est] || ref_used[c.ref]) continue;
    est_used[c.est] = ref_used[c.ref] = 1;
    out.pairs.push_back({c.est, c.ref});
  }
  if (out.pairs.empty()) {
    throw Error(ErrorCode::NoOverlap, "no timestamp pairs within " + std::to_string(max_diff) + " s");
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const IndexPair& a, const IndexPair& b) { return a.est < b.est; });
  return out;
}

/// Pairs state i with state i. Both trajectories must have equal length.
inline AssociationPairing index_pairing(const Trajectory& est, const Trajectory& ref) {
  if (est.size() != ref.size()) throw Error(ErrorCode::InvalidArgument, "trajectory lengths differ");
  if (est.empty()) throw Error(ErrorCode::NoOverlap, "empty trajectory");
  AssociationPairing out;
  out.pairs.reserve(est.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    out.pairs.push_back({i, i});
    out.max_diff = std::max(out.max_diff, std::abs(est[i].t - ref[i].t));
  }
  return out;
}

// Fitting

/// Fits the three translation columns over [t_first, t_last] unless an
/// explicit (wider) domain is given.
inline ChebyshevFit fit_trajectory_translation(const Trajectory& traj, int degree,
                                               const Vector3& weights = Vector3::Ones(),
                                               const FitOptions& options = {},
                                               std::optional<Domain> domain = std::nullopt) {
  if (degree < 1) throw Error(ErrorCode::InvalidArgument, "degree must be >= 1");
  if (traj.size() < static_cast<std::size_t>(degree) + 1) {
    throw Error(ErrorCode::Underdetermined, std::to_string(traj.size()) + " states for degree " +
                                                std::to_string(degree));
  }
  const std::vector<double> t = traj.times();
  const Domain dom = domain.value_or(Domain(t.front(), t.back()));
  SampleSet samples(Eigen::Map<const VectorXd>(t.data(), static_cast<Eigen::Index>(t.size())),
                    traj.translations(), weights);
  return fit_pseudospectral(samples, degree, dom, options);
}

/// Row i is the derivative of the fit at times[i]: (D C)^T w(times[i]).
inline MatrixXd compute_velocity(const ChebyshevFit& fit, std::span<const double> times) {
  return evaluate_fit(derivative_fit(fit), times);
}

/// Root mean square of the Euclidean residual between the fit and the
/// trajectory's translations.
inline double translation_rmse(const ChebyshevFit& fit, const Trajectory& traj) {
  if (traj.empty()) return 0.0;
  const std::vector<double> t = traj.times();
  const MatrixXd diff = evaluate_fit(fit, t) - traj.translations();
  return std::sqrt(diff.squaredNorm() / static_cast<double>(traj.size()));
}

// Binary fit format: "CBF1", u8 version, u32 degree, f64 a, f64 b, u32 dims,
// then (degree+1) x dims f64 node values in row-major order. Little endian.

inline constexpr std::uint8_t kFitFormatVersion = 1;
inline constexpr std::size_t kFitHeaderSize = 4 + 1 + 4 + 8 + 8 + 4;

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  void need(std::size_t n) const {
    if (remaining() < n) throw Error(ErrorCode::TruncatedPayload, "fit stream ends early");
  }

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return std::bit_cast<double>(v);
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize_fit(const ChebyshevFit& fit) {
  std::vector<std::uint8_t> out;
  out.reserve(kFitHeaderSize + 8 * static_cast<std::size_t>(fit.values().size()));
  for (char c : {'C', 'B', 'F', '1'}) out.push_back(static_cast<std::uint8_t>(c));
  out.push_back(kFitFormatVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(fit.degree()));
  detail::put_f64(out, fit.domain().a());
  detail::put_f64(out, fit.domain().b());
  detail::put_u32(out, static_cast<std::uint32_t>(fit.dims()));
  for (Eigen::Index r = 0; r < fit.values().rows(); ++r) {
    for (Eigen::Index c = 0; c < fit.values().cols(); ++c) detail::put_f64(out, fit.values()(r, c));
  }
  return out;
}

inline ChebyshevFit deserialize_fit(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "CBF1", 4) != 0) {
    throw Error(ErrorCode::BadMagic, "not a Chebyshev fit stream");
  }
  detail::ByteReader in(bytes.subspan(4));
  const std::uint8_t version = in.u8();
  if (version != kFitFormatVersion) {
    throw Error(ErrorCode::VersionMismatch, "fit format version " + std::to_string(version));
  }
  const std::uint32_t degree = in.u32();
  const double a = in.f64();
  const double b = in.f64();
  const std::uint32_t dims = in.u32();
  if (degree < 1 || degree > (1u << 24) || dims < 1) {
    throw Error(ErrorCode::InvalidArgument, "fit header has invalid degree or dims");
  }
  const std::size_t count = (static_cast<std::size_t>(degree) + 1) * dims;
  in.need(8 * count);
  MatrixXd values(static_cast<Eigen::Index>(degree) + 1, static_cast<Eigen::Index>(dims));
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) values(r, c) = in.f64();
  }
  if (in.remaining() != 0) throw Error(ErrorCode::TrailingBytes, "unexpected data after fit payload");
  return {static_cast<int>(degree), Domain(a, b), std::move(values)};
}

}  // namespace stateval
