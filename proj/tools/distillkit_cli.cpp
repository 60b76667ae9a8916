// Command-line front end.  Three subcommands share one configuration surface:
//
//   fit      solve a single ridge fit at the error target
//   distill  run the self-distillation chain and export trace/report/curves
//   bounds   check a trace (fresh or loaded from JSON) against the bounds
//
// Settings come from an optional JSON config file with flag overrides on top;
// unknown config keys are rejected so typos fail loudly instead of silently
// running with defaults.  Exit codes: 0 success, 1 bad config/IO/usage,
// 2 collapse (the zero function already meets the tolerance), 3 bound check
// failed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <initializer_list>
#include <iostream>
#include <optional>
#include <string>
#include <system_error>
#include <vector>

#include <CLI11.hpp>

#include "distillkit/datasets.hpp"
#include "distillkit/serialize.hpp"

namespace dk = distillkit;
using dk::json;

namespace {

struct Flags {
  std::string config_path;
  std::string preset;
  std::string csv_path;
  std::string json_path;
  std::string kernel_name;
  std::string trace_path;
  std::string out_dir;
  std::optional<double> bandwidth;
  std::optional<double> epsilon;
  std::optional<std::size_t> max_rounds;
  std::optional<std::size_t> curve_samples;
};

struct OutputNames {
  std::string trace_csv = "trace.csv";
  std::string trace_json = "trace.json";
  std::string report_json = "report.json";
  std::string curve_csv = "curve.csv";
  std::string fit_json = "fit.json";
  std::string bounds_csv = "bounds.csv";
};

// Settings every subcommand needs: parsed config, output naming, limits.
struct CommonSetup {
  json config = json::object();
  std::filesystem::path out_dir = ".";
  OutputNames names;
  std::size_t max_rounds = 50;
  std::size_t curve_samples = 200;
};

// The problem instance itself; only assembled by commands that run a solve.
struct Instance {
  dk::KernelSpec kernel = dk::KernelSpec::cubic_spline_green();
  dk::LoadedDataset data;
  double epsilon = 0.0;
};

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* key : allowed)
      if (it.key() == key) {
        known = true;
        break;
      }
    if (!known) throw dk::BadConfig(where + ": unknown key \"" + it.key() + "\"");
  }
}

double config_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw dk::BadConfig(where + " must be a number");
  return j.get<double>();
}

std::size_t config_count(const json& j, const std::string& where) {
  if (!j.is_number_unsigned()) throw dk::BadConfig(where + " must be a non-negative integer");
  return j.get<std::size_t>();
}

json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw dk::BadConfig(what + ": " + e.what());
  }
}

CommonSetup resolve_common(const Flags& flags) {
  CommonSetup common;
  if (!flags.config_path.empty()) {
    common.config = parse_json_text(dk::read_text_file(flags.config_path),
                                    "config " + flags.config_path);
    if (!common.config.is_object())
      throw dk::BadConfig("config " + flags.config_path + ": top level must be an object");
    reject_unknown_keys(common.config, {"kernel", "data", "epsilon", "max_rounds", "outputs"},
                        "config");
  }

  if (common.config.contains("outputs")) {
    const json& out = common.config.at("outputs");
    if (!out.is_object()) throw dk::BadConfig("config: \"outputs\" must be an object");
    reject_unknown_keys(out,
                        {"trace_csv", "trace_json", "report_json", "curve_csv", "fit_json",
                         "bounds_csv", "curve_samples"},
                        "config outputs");
    auto file_name = [&](const char* key, std::string& slot) {
      if (!out.contains(key)) return;
      if (!out.at(key).is_string())
        throw dk::BadConfig(std::string("config: outputs.") + key + " must be a string");
      slot = out.at(key).get<std::string>();
      if (slot.empty())
        throw dk::BadConfig(std::string("config: outputs.") + key + " must not be empty");
    };
    file_name("trace_csv", common.names.trace_csv);
    file_name("trace_json", common.names.trace_json);
    file_name("report_json", common.names.report_json);
    file_name("curve_csv", common.names.curve_csv);
    file_name("fit_json", common.names.fit_json);
    file_name("bounds_csv", common.names.bounds_csv);
    if (out.contains("curve_samples"))
      common.curve_samples = config_count(out.at("curve_samples"), "config: outputs.curve_samples");
  }
  if (flags.curve_samples) common.curve_samples = *flags.curve_samples;
  if (common.curve_samples < 2) throw dk::BadConfig("curve_samples must be at least 2");

  if (flags.max_rounds) common.max_rounds = *flags.max_rounds;
  else if (common.config.contains("max_rounds"))
    common.max_rounds = config_count(common.config.at("max_rounds"), "config: max_rounds");
  if (common.max_rounds == 0) throw dk::BadConfig("max_rounds must be at least 1");

  std::string out_dir = flags.out_dir;
  if (out_dir.empty())
    if (const char* env = std::getenv("DISTILLKIT_OUT_DIR")) out_dir = env;
  if (out_dir.empty()) out_dir = ".";
  common.out_dir = out_dir;
  std::error_code ec;
  std::filesystem::create_directories(common.out_dir, ec);
  if (ec)
    throw dk::IoFailure("cannot create output directory " + common.out_dir.string() + ": " +
                        ec.message());
  return common;
}

dk::KernelSpec resolve_kernel(const Flags& flags, const json& config) {
  if (!flags.kernel_name.empty()) {
    if (flags.kernel_name == "cubic-spline" || flags.kernel_name == "cubic_spline_green") {
      if (flags.bandwidth) throw dk::BadConfig("--bandwidth only applies to the gaussian kernel");
      return dk::KernelSpec::cubic_spline_green();
    }
    if (flags.kernel_name == "gaussian") {
      if (!flags.bandwidth) throw dk::BadConfig("--kernel gaussian requires --bandwidth");
      return dk::KernelSpec::gaussian(*flags.bandwidth);
    }
    throw dk::BadConfig("unknown kernel \"" + flags.kernel_name +
                        "\" (available: cubic-spline, gaussian)");
  }
  if (flags.bandwidth) throw dk::BadConfig("--bandwidth requires --kernel gaussian");
  if (config.contains("kernel")) return dk::kernel_from_json(config.at("kernel"));
  return dk::KernelSpec::cubic_spline_green();
}

dk::LoadedDataset single_column(dk::Dataset ds) {
  dk::LoadedDataset out;
  out.points = std::move(ds.points);
  out.label_columns.push_back(std::move(ds.labels));
  out.label_names.push_back("y");
  return out;
}

dk::LoadedDataset load_preset(const std::string& name) {
  std::string normalized = name;
  std::replace(normalized.begin(), normalized.end(), '-', '_');
  if (normalized != "paper_sine")
    throw dk::BadConfig("unknown preset \"" + name + "\" (available: paper-sine)");
  return single_column(dk::preset_paper_sine());
}

dk::LoadedDataset resolve_data(const Flags& flags, const json& config, bool* used_preset) {
  *used_preset = false;
  const int flag_sources =
      (flags.preset.empty() ? 0 : 1) + (flags.csv_path.empty() ? 0 : 1) +
      (flags.json_path.empty() ? 0 : 1);
  if (flag_sources > 1) throw dk::BadConfig("choose exactly one of --preset / --csv / --json");
  if (!flags.preset.empty()) {
    *used_preset = true;
    return load_preset(flags.preset);
  }
  if (!flags.csv_path.empty())
    return dk::load_dataset_csv(dk::read_text_file(flags.csv_path));
  if (!flags.json_path.empty())
    return dk::load_dataset_json(
        parse_json_text(dk::read_text_file(flags.json_path), "dataset " + flags.json_path));

  if (!config.contains("data"))
    throw dk::BadConfig(
        "no data source: pass --preset/--csv/--json or a config with a \"data\" entry");
  const json& data = config.at("data");
  if (!data.is_object()) throw dk::BadConfig("config: \"data\" must be an object");
  reject_unknown_keys(data, {"preset", "csv", "json", "generator"}, "config data");
  if (data.size() != 1)
    throw dk::BadConfig("config: \"data\" must hold exactly one of preset/csv/json/generator");

  if (data.contains("preset")) {
    if (!data.at("preset").is_string()) throw dk::BadConfig("config: data.preset must be a string");
    *used_preset = true;
    return load_preset(data.at("preset").get<std::string>());
  }
  if (data.contains("csv")) {
    if (!data.at("csv").is_string())
      throw dk::BadConfig("config: data.csv must be a path string");
    return dk::load_dataset_csv(dk::read_text_file(data.at("csv").get<std::string>()));
  }
  if (data.contains("json")) {
    if (!data.at("json").is_string())
      throw dk::BadConfig("config: data.json must be a path string");
    const std::string path = data.at("json").get<std::string>();
    return dk::load_dataset_json(parse_json_text(dk::read_text_file(path), "dataset " + path));
  }

  const json& gen = data.at("generator");
  if (!gen.is_object()) throw dk::BadConfig("config: data.generator must be an object");
  reject_unknown_keys(gen, {"function", "k", "noise_sigma", "seed"}, "config data.generator");
  if (!gen.contains("function") || !gen.at("function").is_string() ||
      gen.at("function").get<std::string>() != "sine")
    throw dk::BadConfig("config: data.generator.function must be \"sine\"");
  if (!gen.contains("k")) throw dk::BadConfig("config: data.generator.k is required");
  const std::size_t k = config_count(gen.at("k"), "config: data.generator.k");
  double noise_sigma = 0.5;
  if (gen.contains("noise_sigma"))
    noise_sigma = config_number(gen.at("noise_sigma"), "config: data.generator.noise_sigma");
  std::uint64_t seed = 0;
  if (gen.contains("seed")) {
    if (!gen.at("seed").is_number_unsigned())
      throw dk::BadConfig("config: data.generator.seed must be a non-negative integer");
    seed = gen.at("seed").get<std::uint64_t>();
  }
  return single_column(dk::generate_sine_dataset(k, noise_sigma, seed));
}

double resolve_epsilon(const Flags& flags, const json& config, bool used_preset) {
  double epsilon = 0.0;
  if (flags.epsilon) epsilon = *flags.epsilon;
  else if (config.contains("epsilon"))
    epsilon = config_number(config.at("epsilon"), "config: epsilon");
  else if (used_preset) epsilon = dk::kPaperSineEpsilon;
  else throw dk::BadConfig("epsilon is required (--epsilon or a config \"epsilon\" entry)");
  if (!std::isfinite(epsilon) || epsilon <= 0.0)
    throw dk::BadConfig("epsilon must be positive and finite");
  return epsilon;
}

Instance resolve_instance(const Flags& flags, const json& config) {
  Instance inst;
  inst.kernel = resolve_kernel(flags, config);
  bool used_preset = false;
  inst.data = resolve_data(flags, config, &used_preset);
  inst.epsilon = resolve_epsilon(flags, config, used_preset);
  return inst;
}

void emit(const std::filesystem::path& dir, const std::string& name, const std::string& content) {
  const std::filesystem::path path = dir / name;
  dk::write_text_file(path, content);
  std::cout << "wrote " << path.string() << "\n";
}

// Sample grid for exported curves: [0, 1] (the spline kernel's whole domain),
// stretched to cover the data when a gaussian-kernel dataset extends past it.
std::vector<double> curve_grid(const dk::KernelSpec& kernel,
                               const std::vector<dk::Point>& points, std::size_t samples) {
  double lo = 0.0;
  double hi = 1.0;
  if (kernel.family() == dk::KernelSpec::Family::gaussian)
    for (const dk::Point& p : points) {
      lo = std::min(lo, p[0]);
      hi = std::max(hi, p[0]);
    }
  std::vector<double> xs(samples);
  for (std::size_t i = 0; i < samples; ++i)
    xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(samples - 1);
  return xs;
}

std::vector<double> sample_curve(const dk::RegressionModel& model, const std::vector<double>& xs) {
  std::vector<double> values(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) values[i] = dk::predict(model, {xs[i]});
  return values;
}

json class_entry(const std::string& name, const dk::RegressionModel& model) {
  json entry;
  entry["name"] = name;
  entry["collapsed"] = false;
  entry["c"] = model.c;
  entry["achieved_error"] = model.achieved_error;
  json coeffs = json::array();
  for (double a : model.dual_coeffs) coeffs.push_back(a);
  entry["dual_coeffs"] = std::move(coeffs);
  return entry;
}

int cmd_fit(const Flags& flags) {
  const CommonSetup common = resolve_common(flags);
  const Instance inst = resolve_instance(flags, common.config);
  dk::FitConfig fit_config;
  fit_config.epsilon = inst.epsilon;

  const bool scalar_inputs = inst.data.points.front().size() == 1;
  const std::vector<double> xs =
      scalar_inputs ? curve_grid(inst.kernel, inst.data.points, common.curve_samples)
                    : std::vector<double>{};
  std::vector<std::string> curve_names;
  std::vector<std::vector<double>> curve_columns;

  json classes = json::array();
  if (inst.data.label_columns.size() == 1) {
    const dk::Dataset data = dk::Dataset::make(inst.data.points, inst.data.label_columns.front());
    const dk::RegressionModel model = dk::fit(data, inst.kernel, fit_config);
    classes.push_back(class_entry(inst.data.label_names.front(), model));
    if (scalar_inputs) {
      curve_names.push_back("f");
      curve_columns.push_back(sample_curve(model, xs));
    }
  } else {
    const dk::MulticlassFit fit =
        dk::fit_multiclass(inst.data.points, inst.data.label_columns, inst.kernel, fit_config);
    bool any_fitted = false;
    for (std::size_t i = 0; i < fit.models.size(); ++i) {
      const std::string& name = inst.data.label_names[i];
      if (fit.models[i]) {
        any_fitted = true;
        classes.push_back(class_entry(name, *fit.models[i]));
        if (scalar_inputs) {
          curve_names.push_back("f_" + name);
          curve_columns.push_back(sample_curve(*fit.models[i], xs));
        }
      } else {
        // Collapsed class: the zero function already meets the tolerance.
        json entry;
        entry["name"] = name;
        entry["collapsed"] = true;
        classes.push_back(std::move(entry));
        if (scalar_inputs) {
          curve_names.push_back("f_" + name);
          curve_columns.emplace_back(xs.size(), 0.0);
        }
      }
    }
    if (!any_fitted)
      throw dk::CollapseCondition("fit: every label column is in the collapse regime at epsilon " +
                                  std::to_string(inst.epsilon));
  }

  json summary;
  summary["kernel"] = dk::kernel_to_json(inst.kernel);
  summary["epsilon"] = inst.epsilon;
  summary["k"] = inst.data.points.size();
  summary["classes"] = std::move(classes);
  emit(common.out_dir, common.names.fit_json, summary.dump(2) + "\n");
  if (scalar_inputs)
    emit(common.out_dir, common.names.curve_csv, dk::curve_to_csv(curve_names, xs, curve_columns));
  else
    std::cout << "curve skipped: points are not one-dimensional\n";
  return 0;
}

int cmd_distill(const Flags& flags) {
  const CommonSetup common = resolve_common(flags);
  const Instance inst = resolve_instance(flags, common.config);
  if (inst.data.label_columns.size() != 1)
    throw dk::BadConfig("distill needs a single label column; the dataset has " +
                        std::to_string(inst.data.label_columns.size()));
  const dk::Dataset data = dk::Dataset::make(inst.data.points, inst.data.label_columns.front());
  dk::FitConfig fit_config;
  fit_config.epsilon = inst.epsilon;
  const dk::DistillationTrace trace = dk::run_chain(data, inst.kernel, fit_config, common.max_rounds);

  emit(common.out_dir, common.names.trace_csv, dk::trace_to_csv(trace));
  emit(common.out_dir, common.names.trace_json, dk::trace_to_json(trace).dump(2) + "\n");
  emit(common.out_dir, common.names.report_json,
       dk::report_to_json(dk::build_report(trace)).dump(2) + "\n");

  if (data.point_dim() == 1) {
    const std::vector<double> xs = curve_grid(inst.kernel, inst.data.points, common.curve_samples);
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;
    for (std::size_t t = 0; t < trace.states.size(); ++t) {
      names.push_back("f_t" + std::to_string(t));
      columns.push_back(sample_curve(dk::model_at(trace, t), xs));
    }
    emit(common.out_dir, common.names.curve_csv, dk::curve_to_csv(names, xs, columns));
  } else {
    std::cout << "curve skipped: points are not one-dimensional\n";
  }

  std::cout << "rounds: " << trace.states.size();
  if (trace.collapsed_at) std::cout << ", collapsed at round " << *trace.collapsed_at << "\n";
  else std::cout << ", stopped at the round cap without collapsing\n";
  return 0;
}

int cmd_bounds(const Flags& flags) {
  const CommonSetup common = resolve_common(flags);
  const dk::DistillationTrace trace = [&]() -> dk::DistillationTrace {
    if (!flags.trace_path.empty()) {
      if (!flags.preset.empty() || !flags.csv_path.empty() || !flags.json_path.empty())
        throw dk::BadConfig("bounds: pass either --trace or a data source, not both");
      return dk::trace_from_json(
          parse_json_text(dk::read_text_file(flags.trace_path), "trace " + flags.trace_path));
    }
    const Instance inst = resolve_instance(flags, common.config);
    if (inst.data.label_columns.size() != 1)
      throw dk::BadConfig("bounds needs a single label column; the dataset has " +
                          std::to_string(inst.data.label_columns.size()));
    const dk::Dataset data = dk::Dataset::make(inst.data.points, inst.data.label_columns.front());
    dk::FitConfig fit_config;
    fit_config.epsilon = inst.epsilon;
    return dk::run_chain(data, inst.kernel, fit_config, common.max_rounds);
  }();

  const std::vector<dk::BoundRow> rows = dk::bound_comparisons(trace);
  emit(common.out_dir, common.names.bounds_csv, dk::bounds_to_csv(rows));
  std::size_t violations = 0;
  for (const dk::BoundRow& row : rows)
    if (!row.satisfied) ++violations;
  if (violations != 0) {
    std::cerr << violations << " of " << rows.size() << " bound checks failed\n";
    return 3;
  }
  std::cout << "all " << rows.size() << " bound checks satisfied\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kernel ridge self-distillation toolkit"};
  app.require_subcommand(1);
  Flags flags;

  auto add_common_flags = [&flags](CLI::App* cmd) {
    cmd->add_option("--config", flags.config_path, "JSON experiment config");
    cmd->add_option("--preset", flags.preset, "built-in dataset (paper-sine)");
    cmd->add_option("--csv", flags.csv_path, "dataset CSV (header: x, then label columns)");
    cmd->add_option("--json", flags.json_path, "dataset JSON ({\"points\": ..., \"labels\": ...})");
    cmd->add_option("--kernel", flags.kernel_name, "kernel family: cubic-spline or gaussian");
    cmd->add_option("--bandwidth", flags.bandwidth, "gaussian kernel bandwidth");
    cmd->add_option("--epsilon", flags.epsilon, "target mean-squared training error");
    cmd->add_option("--max-rounds", flags.max_rounds, "distillation round cap (default 50)");
    cmd->add_option("--curve-samples", flags.curve_samples,
                    "sample count for exported curves (default 200)");
    cmd->add_option("--out-dir", flags.out_dir,
                    "output directory (default $DISTILLKIT_OUT_DIR, then .)");
  };

  CLI::App* fit = app.add_subcommand("fit", "solve one ridge fit at the error target");
  CLI::App* distill = app.add_subcommand("distill", "run the self-distillation chain");
  CLI::App* bounds =
      app.add_subcommand("bounds", "check recorded dynamics against the closed-form bounds");
  add_common_flags(fit);
  add_common_flags(distill);
  add_common_flags(bounds);
  bounds->add_option("--trace", flags.trace_path,
                     "existing trace JSON to check instead of running a chain");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (fit->parsed()) return cmd_fit(flags);
    if (distill->parsed()) return cmd_distill(flags);
    return cmd_bounds(flags);
  } catch (const dk::CollapseCondition& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
