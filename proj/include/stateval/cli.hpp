#pragma once

// Command-line front end. `run` is the whole program minus process setup so
// that tests can drive it in-process and inspect exit codes and output.
//
// Exit codes: 0 success, 1 usage, 2 input parse, 3 numeric/fit,
// 4 association, 5 precondition.

#include <cmath>
#include <cstdint>
#include <iterator>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "stateval/chebyshev.hpp"
#include "stateval/error.hpp"
#include "stateval/metrics.hpp"
#include "stateval/report.hpp"
#include "stateval/trajectory.hpp"

namespace stateval::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kParseError = 2,
  kNumericError = 3,
  kAssociationError = 4,
  kPreconditionError = 5,
};

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedLine:
    case ErrorCode::NonMonotoneTime:
    case ErrorCode::DenormalizedQuaternion:
    case ErrorCode::IoError:
      return kParseError;
    case ErrorCode::NoOverlap:
      return kAssociationError;
    case ErrorCode::MissingVelocity:
    case ErrorCode::DeltaTooLarge:
      return kPreconditionError;
    default:
      return kNumericError;
  }
}

/// Terminates a subcommand with an exit code and a message for stderr.
struct Failure : std::runtime_error {
  Failure(int code, const std::string& message) : std::runtime_error(message), exit_code(code) {}
  int exit_code;
};

struct RunConfig {
  std::string subcommand;
  std::vector<std::string> inputs;
  std::string reference;
  std::string output;
  std::string csv;
  std::string truth;
  std::string fit_file;
  std::string times_file;
  int degree = 0;
  std::string metric = "ase";
  std::string align = "sim3";
  int delta = 1;
  double delta_seconds = 0.0;
  double max_diff = kDefaultMaxDiff;
  std::vector<double> weights{1.0, 1.0, 1.0};
  std::vector<double> domain;
  double ridge = 0.0;
  double rate = 0.0;
  std::string format = "table";
  bool compare_fd = false;
  bool truth_given = false;
  bool synth_vel = false;
  bool per_step = false;
  bool velocity_columns = false;
};

namespace detail {

template <typename F>
auto wrap(const std::string& what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Failure(exit_code_for(e.code()), what + ": " + e.what());
  }
}

inline Trajectory load_trajectory(const std::string& path, std::ostream& err) {
  return wrap(path, [&] {
    std::vector<std::string> warnings;
    Trajectory t = load_tum(path, VelocityColumns::Detect, &warnings);
    for (const auto& w : warnings) err << "warning: " << path << ": " << w << "\n";
    return t;
  });
}

inline ChebyshevFit load_fit(const std::string& path) {
  return wrap(path, [&] {
    const std::string bytes = read_text_file(path);
    return deserialize_fit(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
  });
}

inline void save_fit(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  wrap(path, [&] {
    write_text_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  });
}

inline AlignMode parse_align(const std::string& s) {
  if (s == "sim3") return AlignMode::Sim3;
  if (s == "se3") return AlignMode::Se3;
  return AlignMode::Identity;
}

inline Vector3 weight_vector(const RunConfig& cfg) {
  if (cfg.weights.size() == 1) return Vector3::Constant(cfg.weights[0]);
  if (cfg.weights.size() == 3) return {cfg.weights[0], cfg.weights[1], cfg.weights[2]};
  throw Failure(kUsage, "--weights takes one value or three comma-separated values");
}

inline std::optional<Domain> domain_override(const RunConfig& cfg) {
  if (cfg.domain.empty()) return std::nullopt;
  if (cfg.domain.size() != 2) throw Failure(kUsage, "--domain takes two comma-separated values");
  return wrap("--domain", [&] { return Domain(cfg.domain[0], cfg.domain[1]); });
}

inline void require_degree(const RunConfig& cfg, const char* why) {
  if (cfg.degree < 1) throw Failure(kUsage, std::string("--degree N (N >= 1) is required ") + why);
}

inline ChebyshevFit fit_translation(const std::string& name, const Trajectory& traj, const RunConfig& cfg) {
  const Vector3 w = weight_vector(cfg);
  const auto dom = domain_override(cfg);
  return wrap(name, [&] { return fit_trajectory_translation(traj, cfg.degree, w, FitOptions{cfg.ridge}, dom); });
}

inline double time_span(const Trajectory& traj) {
  return traj.empty() ? 0.0 : traj.states().back().t - traj.states().front().t;
}

inline void emit_json(std::ostream& out, const nlohmann::ordered_json& j) { out << j.dump(2) << "\n"; }

}  // namespace detail

// Subcommands

inline int cmd_fit(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  detail::require_degree(cfg, "for fitting");
  const std::string& path = cfg.inputs.at(0);
  const Trajectory traj = detail::load_trajectory(path, err);
  const ChebyshevFit fit = detail::fit_translation(path, traj, cfg);
  const double rmse = translation_rmse(fit, traj);
  const auto bytes = serialize_fit(fit);
  if (!cfg.output.empty()) detail::save_fit(cfg.output, bytes);

  if (cfg.format == "json") {
    nlohmann::ordered_json j;
    j["input"] = path;
    j["samples"] = traj.size();
    j["time_s"] = round_sig9(detail::time_span(traj));
    j["degree"] = fit.degree();
    j["transl_rmse"] = round_sig9(rmse);
    j["fit_bytes"] = bytes.size();
    detail::emit_json(out, j);
  } else {
    out << format_table({"Trajectory", "Time (s)", "Transl. RMSE", "Degree"},
                        {{path, format_sig9(detail::time_span(traj)), format_sig9(rmse),
                          std::to_string(fit.degree())}});
  }
  return kOk;
}

inline int cmd_velocity(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const std::string& path = cfg.inputs.at(0);
  const Trajectory traj = detail::load_trajectory(path, err);
  std::optional<ChebyshevFit> fit;
  if (!cfg.fit_file.empty()) {
    fit = detail::load_fit(cfg.fit_file);
  } else {
    detail::require_degree(cfg, "unless --fit is given");
    fit = detail::fit_translation(path, traj, cfg);
  }
  if (fit->dims() != 3) throw Failure(kNumericError, cfg.fit_file + ": fit is not three-dimensional");

  const std::vector<double> t = traj.times();
  const MatrixXd v = detail::wrap(path, [&] { return compute_velocity(*fit, t); });
  const MatrixXd p_fit = detail::wrap(path, [&] { return evaluate_fit(*fit, t); });
  const Trajectory with_v = traj.with_velocities(v);

  std::optional<MatrixXd> fd;
  if (cfg.compare_fd || cfg.truth_given) fd = detail::wrap(path, [&] { return finite_difference_velocity(traj); });

  // truth velocity aligned to input rows, when available
  std::vector<std::optional<Vector3>> truth_rows(traj.size());
  std::optional<std::pair<double, double>> vel_rmse;
  std::size_t truth_pairs = 0;
  if (cfg.truth_given) {
    const Trajectory truth = detail::load_trajectory(cfg.truth, err);
    if (!truth.has_velocity()) {
      throw Failure(kPreconditionError, cfg.truth + ": MissingVelocity: truth file has no velocity columns");
    }
    const AssociationPairing pairing =
        detail::wrap(cfg.truth, [&] { return associate(traj, truth, cfg.max_diff); });
    MatrixXd vt(static_cast<Eigen::Index>(pairing.size()), 3);
    MatrixXd vc(vt.rows(), 3);
    MatrixXd vf(vt.rows(), 3);
    for (std::size_t k = 0; k < pairing.size(); ++k) {
      const auto [i, j] = pairing.pairs[k];
      const auto row = static_cast<Eigen::Index>(k);
      vt.row(row) = truth[j].state.velocity.transpose();
      vc.row(row) = v.row(static_cast<Eigen::Index>(i));
      vf.row(row) = fd->row(static_cast<Eigen::Index>(i));
      truth_rows[i] = truth[j].state.velocity;
    }
    vel_rmse = {rowwise_rmse(vc, vt), rowwise_rmse(vf, vt)};
    truth_pairs = pairing.size();
  }

  const std::string tum = write_tum(with_v);
  const bool tum_to_stdout = cfg.output.empty() && cfg.csv.empty();
  if (!cfg.output.empty()) detail::wrap(cfg.output, [&] { write_text_file(cfg.output, tum); });
  if (tum_to_stdout) out << tum;

  if (!cfg.csv.empty()) {
    std::string csv = "t,p_x,p_y,p_z,fit_x,fit_y,fit_z,v_x,v_y,v_z";
    if (fd) csv += ",fd_v_x,fd_v_y,fd_v_z";
    if (cfg.truth_given) csv += ",true_v_x,true_v_y,true_v_z";
    csv += "\n";
    for (std::size_t i = 0; i < traj.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      std::vector<double> cells{traj[i].t};
      for (int c = 0; c < 3; ++c) cells.push_back(traj[i].state.translation[c]);
      for (int c = 0; c < 3; ++c) cells.push_back(p_fit(r, c));
      for (int c = 0; c < 3; ++c) cells.push_back(v(r, c));
      if (fd) {
        for (int c = 0; c < 3; ++c) cells.push_back((*fd)(r, c));
      }
      for (std::size_t k = 0; k < cells.size(); ++k) {
        if (k > 0) csv += ',';
        csv += format_sig9(cells[k]);
      }
      if (cfg.truth_given) {
        for (int c = 0; c < 3; ++c) csv += "," + (truth_rows[i] ? format_sig9((*truth_rows[i])[c]) : "");
      }
      csv += "\n";
    }
    detail::wrap(cfg.csv, [&] { write_text_file(cfg.csv, csv); });
  }

  if (tum_to_stdout) return kOk;
  const double transl_rmse = translation_rmse(*fit, traj);
  if (cfg.format == "json") {
    nlohmann::ordered_json j;
    j["input"] = path;
    j["samples"] = traj.size();
    j["degree"] = fit->degree();
    j["transl_rmse"] = round_sig9(transl_rmse);
    if (vel_rmse) {
      j["truth_pairs"] = truth_pairs;
      j["vel_rmse_chebyshev"] = round_sig9(vel_rmse->first);
      j["vel_rmse_fd"] = round_sig9(vel_rmse->second);
    }
    detail::emit_json(out, j);
  } else {
    std::vector<std::vector<std::string>> rows;
    const std::string cheb = "chebyshev (N=" + std::to_string(fit->degree()) + ")";
    if (vel_rmse) {
      rows.push_back({cheb, format_sig9(transl_rmse), format_sig9(vel_rmse->first)});
      rows.push_back({"finite differences", "-", format_sig9(vel_rmse->second)});
      out << format_table({"Method", "Transl. RMSE", "Vel. RMSE"}, rows);
    } else {
      rows.push_back({cheb, format_sig9(transl_rmse)});
      out << format_table({"Method", "Transl. RMSE"}, rows);
    }
  }
  return kOk;
}

inline int cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.reference.empty()) throw Failure(kUsage, "--ref FILE is required");
  Trajectory ref = detail::load_trajectory(cfg.reference, err);
  const bool is_ase = cfg.metric == "ase";
  bool synthesized = false;
  if (is_ase && !ref.has_velocity()) {
    if (!cfg.synth_vel) {
      throw Failure(kPreconditionError,
                    cfg.reference + ": MissingVelocity: reference has no velocity columns (hint: run "
                                    "`stateval velocity` on it first, or pass --synth-vel --degree N)");
    }
    detail::require_degree(cfg, "with --synth-vel");
    const ChebyshevFit fit = detail::fit_translation(cfg.reference, ref, cfg);
    const std::vector<double> t = ref.times();
    ref = ref.with_velocities(compute_velocity(fit, t));
    synthesized = true;
  }
  const std::string label = metric_label(cfg.metric, synthesized);
  const AlignMode mode = cfg.metric == "rpe" ? AlignMode::Identity : detail::parse_align(cfg.align);

  struct Row {
    std::string name;
    MetricReport report;
    SimilarityTransform alignment;
    std::size_t delta = 0;
  };
  std::vector<Row> rows;
  for (const auto& path : cfg.inputs) {
    const Trajectory est = detail::load_trajectory(path, err);
    if (is_ase && !est.has_velocity()) {
      throw Failure(kPreconditionError, path + ": MissingVelocity: estimate has no velocity columns");
    }
    Row row{path, {}, {}, 0};
    detail::wrap(path, [&] {
      const AssociationPairing pairing = associate(est, ref, cfg.max_diff);
      if (cfg.metric == "rpe") {
        row.delta = cfg.delta_seconds > 0.0 ? delta_steps_from_seconds(ref, pairing, cfg.delta_seconds)
                                            : static_cast<std::size_t>(std::max(cfg.delta, 0));
        row.report = rpe(est, ref, pairing, row.delta);
      } else {
        row.alignment = align_trajectories(est, ref, pairing, mode);
        row.report = is_ase ? ase(est, ref, pairing, row.alignment) : ate(est, ref, pairing, row.alignment);
      }
    });
    rows.push_back(std::move(row));
  }

  if (cfg.format == "json") {
    auto all = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      nlohmann::ordered_json j = report_to_json(cfg.metric, r.report, r.alignment, cfg.per_step);
      j["label"] = label;
      j["estimator"] = r.name;
      if (cfg.metric == "rpe") j["delta"] = r.delta;
      all.push_back(std::move(j));
    }
    detail::emit_json(out, rows.size() == 1 ? all[0] : all);
  } else if (cfg.format == "csv") {
    if (cfg.per_step) {
      out << "estimator,index,error\n";
      for (const auto& r : rows) {
        for (std::size_t k = 0; k < r.report.per_step.size(); ++k) {
          out << r.name << "," << k << "," << format_sig9(r.report.per_step[k]) << "\n";
        }
      }
    } else {
      out << "estimator,metric,count,rmse,std,median\n";
      for (const auto& r : rows) {
        out << r.name << "," << label << "," << r.report.count << "," << format_sig9(r.report.rmse) << ","
            << format_sig9(r.report.std) << "," << format_sig9(r.report.median) << "\n";
      }
    }
  } else {
    out << label << " (align: " << to_string(mode) << ")\n";
    std::vector<std::vector<std::string>> table;
    for (const auto& r : rows) {
      table.push_back({r.name, format_sig9(r.report.rmse), format_sig9(r.report.std), format_sig9(r.report.median)});
    }
    out << format_table({"Estimator", "RMSE", "STD", "Median"}, table);
  }
  return kOk;
}

inline int cmd_compress(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  detail::require_degree(cfg, "for compression");
  if (cfg.output.empty()) throw Failure(kUsage, "-o FILE is required");
  const std::string& path = cfg.inputs.at(0);
  const std::string text = detail::wrap(path, [&] { return read_text_file(path); });
  const Trajectory traj = detail::load_trajectory(path, err);
  const ChebyshevFit fit = detail::fit_translation(path, traj, cfg);
  const auto bytes = serialize_fit(fit);
  detail::save_fit(cfg.output, bytes);
  const double ratio = text.empty() ? 0.0 : static_cast<double>(bytes.size()) / static_cast<double>(text.size());
  const double rmse = translation_rmse(fit, traj);

  if (cfg.format == "json") {
    nlohmann::ordered_json j;
    j["input"] = path;
    j["output"] = cfg.output;
    j["samples"] = traj.size();
    j["degree"] = fit.degree();
    j["tum_bytes"] = text.size();
    j["fit_bytes"] = bytes.size();
    j["ratio"] = round_sig9(ratio);
    j["transl_rmse"] = round_sig9(rmse);
    detail::emit_json(out, j);
  } else {
    out << format_table({"Trajectory", "Samples", "Degree", "TUM bytes", "Fit bytes", "Ratio", "Transl. RMSE"},
                        {{path, std::to_string(traj.size()), std::to_string(fit.degree()),
                          std::to_string(text.size()), std::to_string(bytes.size()), format_sig9(ratio),
                          format_sig9(rmse)}});
  }
  return kOk;
}

inline int cmd_sample(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const std::string& path = cfg.inputs.at(0);
  const ChebyshevFit fit = detail::load_fit(path);
  if (fit.dims() != 3) throw Failure(kNumericError, path + ": fit is not three-dimensional");

  std::vector<double> times;
  std::optional<Trajectory> reference;
  if (!cfg.times_file.empty()) {
    reference = detail::load_trajectory(cfg.times_file, err);
    times = reference->times();
  } else if (cfg.rate > 0.0) {
    const Domain& dom = fit.domain();
    const double step = 1.0 / cfg.rate;
    for (std::size_t k = 0;; ++k) {
      const double t = dom.a() + static_cast<double>(k) * step;
      if (t > dom.b() + dom.slack()) break;
      times.push_back(std::min(t, dom.b()));
    }
  } else {
    throw Failure(kUsage, "one of --rate HZ or --times FILE is required");
  }

  const MatrixXd p = detail::wrap(path, [&] { return evaluate_fit(fit, times); });
  std::vector<StampedState> states(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    states[i].t = times[i];
    states[i].state.translation = p.row(static_cast<Eigen::Index>(i)).transpose();
  }
  Trajectory sampled = detail::wrap(path, [&] { return Trajectory(std::move(states), false); });
  if (cfg.velocity_columns) {
    sampled = sampled.with_velocities(detail::wrap(path, [&] { return compute_velocity(fit, times); }));
  }
  const std::string tum = write_tum(sampled);
  if (cfg.output.empty()) {
    out << tum;
    return kOk;
  }
  detail::wrap(cfg.output, [&] { write_text_file(cfg.output, tum); });
  if (reference) {
    const double rmse = translation_rmse(fit, *reference);
    if (cfg.format == "json") {
      nlohmann::ordered_json j;
      j["input"] = path;
      j["samples"] = times.size();
      j["transl_rmse"] = round_sig9(rmse);
      detail::emit_json(out, j);
    } else {
      out << format_table({"Fit", "Samples", "Transl. RMSE"},
                          {{path, std::to_string(times.size()), format_sig9(rmse)}});
    }
  }
  return kOk;
}

// Entry point

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Trajectory and state-estimation evaluation (ASE/ATE/RPE, Chebyshev velocity)", "stateval"};
  app.require_subcommand(1);

  auto add_fit_flags = [&cfg](CLI::App* sub) {
    sub->add_option("--degree,-N", cfg.degree, "Polynomial degree N");
    sub->add_option("--weights", cfg.weights, "Per-axis inverse-variance weights wx,wy,wz")->delimiter(',');
    sub->add_option("--ridge", cfg.ridge, "Tikhonov ridge on node values (default 0)");
    sub->add_option("--domain", cfg.domain, "Fit domain a,b (default: first/last timestamp)")->delimiter(',');
  };
  auto add_format = [&cfg](CLI::App* sub, std::vector<std::string> allowed) {
    sub->add_option("--format", cfg.format, "Output format")->check(CLI::IsMember(std::move(allowed)));
  };

  CLI::App* fit = app.add_subcommand("fit", "Fit a Chebyshev polynomial to a trajectory's translation");
  fit->add_option("input", cfg.inputs, "TUM trajectory")->required()->expected(1);
  fit->add_option("-o,--output", cfg.output, "Write the binary fit here");
  add_fit_flags(fit);
  add_format(fit, {"table", "json"});

  CLI::App* vel = app.add_subcommand("velocity", "Synthesize linear velocity by differentiating a fit");
  vel->add_option("input", cfg.inputs, "TUM trajectory")->required()->expected(1);
  vel->add_option("-o,--output", cfg.output, "Extended TUM output (default: stdout)");
  vel->add_option("--fit", cfg.fit_file, "Use this binary fit instead of fitting the input");
  vel->add_option("--csv", cfg.csv, "Write a CSV series for plotting");
  vel->add_flag("--compare-fd", cfg.compare_fd, "Add centered finite-difference velocity");
  vel->add_option("--truth", cfg.truth, "TUM file with true velocity columns");
  vel->add_option("--max-diff", cfg.max_diff, "Max timestamp gap when matching --truth (s)");
  add_fit_flags(vel);
  add_format(vel, {"table", "json"});

  CLI::App* eval = app.add_subcommand("eval", "Evaluate estimated trajectories against a reference");
  eval->add_option("estimates", cfg.inputs, "Estimated trajectories (TUM)")->required();
  eval->add_option("--ref,-r", cfg.reference, "Reference trajectory (TUM)")->required();
  eval->add_option("--metric", cfg.metric, "ase|ate|rpe")->check(CLI::IsMember({"ase", "ate", "rpe"}));
  eval->add_option("--align", cfg.align, "sim3|se3|none")->check(CLI::IsMember({"sim3", "se3", "none"}));
  eval->add_option("--delta", cfg.delta, "RPE window in steps")->check(CLI::PositiveNumber);
  eval->add_option("--delta-seconds", cfg.delta_seconds, "RPE window in seconds (overrides --delta)");
  eval->add_option("--max-diff", cfg.max_diff, "Max timestamp gap for association (s)");
  eval->add_flag("--synth-vel", cfg.synth_vel, "Synthesize missing reference velocity from a fit");
  eval->add_flag("--per-step", cfg.per_step, "Include per-step errors (json/csv)");
  add_fit_flags(eval);
  add_format(eval, {"table", "json", "csv"});

  CLI::App* compress = app.add_subcommand("compress", "Fit and store a trajectory's translation compactly");
  compress->add_option("input", cfg.inputs, "TUM trajectory")->required()->expected(1);
  compress->add_option("-o,--output", cfg.output, "Binary fit output")->required();
  add_fit_flags(compress);
  add_format(compress, {"table", "json"});

  CLI::App* sample = app.add_subcommand("sample", "Evaluate a stored fit back to TUM");
  sample->add_option("input", cfg.inputs, "Binary fit")->required()->expected(1);
  sample->add_option("-o,--output", cfg.output, "TUM output (default: stdout)");
  sample->add_option("--rate", cfg.rate, "Uniform sample rate (Hz)")->check(CLI::PositiveNumber);
  sample->add_option("--times", cfg.times_file, "Sample at this TUM file's timestamps");
  sample->add_flag("--velocity", cfg.velocity_columns, "Append velocity columns");
  add_format(sample, {"table", "json"});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kUsage;
  }
  cfg.truth_given = !cfg.truth.empty();

  try {
    if (*fit) return cmd_fit(cfg, out, err);
    if (*vel) return cmd_velocity(cfg, out, err);
    if (*eval) return cmd_eval(cfg, out, err);
    if (*compress) return cmd_compress(cfg, out, err);
    if (*sample) return cmd_sample(cfg, out, err);
  } catch (const Failure& f) {
    err << "error: " << f.what() << "\n";
    return f.exit_code;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  }
  return kUsage;
}

/// `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"stateval"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace stateval::cli
