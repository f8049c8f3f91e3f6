#pragma once

// Subcommands of the sdnn tool: generate | preprocess | run | fit | report.
//
// Exit codes: 0 success, 2 configuration error, 3 data or shape error,
// 4 insufficient data, 5 computed categories differ from truth.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sdnn/sdnn.hpp"

namespace sdnn::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kDataError = 3,
  kInsufficientData = 4,
  kIncorrect = 5,
};

/// Flags shared by generate and run. Unset flags leave the config file value.
struct ConfigFlags {
  std::optional<std::string> config_file;
  std::optional<std::size_t> neurons;
  std::optional<std::size_t> layers;
  std::optional<std::string> radices;
  std::optional<std::size_t> kron_width;
  std::optional<double> weight_value;
  std::optional<double> bias_value;
  std::optional<std::string> inputs;
  std::optional<std::size_t> input_neurons;
  std::optional<std::size_t> workers;
  std::optional<std::string> representation;
  std::optional<std::size_t> repetitions;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;

  void add_network_options(CLI::App& app) {
    app.add_option("--config", config_file, "key=value configuration file");
    app.add_option("--neurons", neurons, "neurons per layer");
    app.add_option("--layers", layers, "number of layers");
    app.add_option("--radices", radices, "comma-separated mixed radices");
    app.add_option("--kron-width", kron_width, "Kronecker expansion factor");
    app.add_option("--weight-value", weight_value, "value of every nonzero weight");
    app.add_option("--bias-value", bias_value, "bias of every neuron");
    app.add_option("--output-dir", output_dir, "directory for outputs");
  }

  void add_run_options(CLI::App& app) {
    add_network_options(app);
    app.add_option("--inputs", inputs, "input TSV path or synthetic:<count>:<density>");
    app.add_option("--input-neurons", input_neurons, "width of the input TSV");
    app.add_option("--workers", workers, "worker threads (0 = all)");
    app.add_option("--representation", representation, "dense | sparse");
    app.add_option("--repetitions", repetitions, "timed repetitions");
    app.add_option("--seed", seed, "seed for synthetic inputs");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (config_file) apply_key_values(cfg, read_key_values(*config_file));
    KeyValues kv;
    auto set = [&](const char* key, const auto& opt) {
      if (opt) {
        if constexpr (std::is_same_v<std::decay_t<decltype(*opt)>, std::string>) {
          kv[key] = *opt;
        } else {
          std::ostringstream os;
          os.precision(17);
          os << *opt;
          kv[key] = os.str();
        }
      }
    };
    set("neurons", neurons);
    set("layers", layers);
    set("radices", radices);
    set("kron_width", kron_width);
    set("weight_value", weight_value);
    set("bias_value", bias_value);
    set("inputs", inputs);
    set("input_neurons", input_neurons);
    set("workers", workers);
    set("representation", representation);
    set("repetitions", repetitions);
    set("output_dir", output_dir);
    set("seed", seed);
    apply_key_values(cfg, kv);
    return cfg;
  }
};

inline int report_error(const char* kind, const std::exception& e, int code) {
  std::cerr << "sdnn: " << kind << ": " << e.what() << "\n";
  return code;
}

/// Runs `body` and maps library exceptions onto exit codes. `config_stage`
/// selects whether invariant violations count as configuration errors.
template <typename Fn>
int guarded(bool config_stage, Fn&& body) {
  try {
    return body();
  } catch (const InsufficientDataError& e) {
    return report_error("insufficient data", e, kInsufficientData);
  } catch (const ShapeError& e) {
    return report_error("shape error", e, kDataError);
  } catch (const InvariantError& e) {
    return config_stage ? report_error("config error", e, kConfigError)
                        : report_error("data error", e, kDataError);
  } catch (const ParseError& e) {
    return config_stage ? report_error("config error", e, kConfigError)
                        : report_error("data error", e, kDataError);
  } catch (const IoError& e) {
    return config_stage ? report_error("config error", e, kConfigError)
                        : report_error("i/o error", e, kDataError);
  } catch (const NonFiniteError& e) {
    return report_error("data error", e, kDataError);
  }
}

inline int cmd_generate(const ConfigFlags& flags) {
  RunConfig cfg;
  NetworkSpec spec;
  if (int rc = guarded(true, [&] {
        cfg = flags.resolve();
        spec = cfg.network_spec();
        return 0;
      })) {
    return rc;
  }
  return guarded(false, [&] {
    const auto net = generate_network<float>(spec);
    write_network(net, cfg.output_dir);
    std::cout << format_key_values(network_manifest(spec));
    return 0;
  });
}

struct PreprocessArgs {
  std::string idx_path;
  std::size_t side = 32;
  int threshold = kDefaultThreshold;
  std::string out = "inputs.tsv";
  std::size_t limit = 0;
};

inline int cmd_preprocess(const PreprocessArgs& args) {
  if (args.threshold < 1 || args.threshold > 255) {
    std::cerr << "sdnn: config error: threshold: must be in [1, 255]\n";
    return kConfigError;
  }
  if (args.side == 0) {
    std::cerr << "sdnn: config error: side: must be positive\n";
    return kConfigError;
  }
  if (!is_standard_side(args.side)) {
    std::cerr << "sdnn: warning: side " << args.side
              << " is not one of the challenge widths 32, 64, 128, 256\n";
  }
  return guarded(false, [&] {
    const auto images = read_idx_images(args.idx_path);
    const std::size_t n =
        args.limit == 0 ? images.n_images : std::min(args.limit, images.n_images);
    std::vector<std::vector<Index>> rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back(preprocess_image(images.image(i), images.side, args.side, args.threshold));
    }
    write_input_tsv(rows, args.out);
    std::cout << "wrote " << n << " images (" << args.side * args.side << " neurons) to "
              << args.out << "\n";
    return 0;
  });
}

struct RunArgs {
  ConfigFlags flags;
  std::optional<std::string> network_dir;
  std::optional<std::string> truth;
  std::optional<std::string> results;
  bool append = false;
};

inline int cmd_run(const RunArgs& args) {
  RunConfig cfg;
  NetworkSpec spec;
  std::optional<SyntheticInputs> synth;
  if (int rc = guarded(true, [&] {
        cfg = args.flags.resolve();
        if (!args.network_dir) spec = cfg.network_spec();
        if (cfg.repetitions < 1) throw InvariantError("repetitions: must be >= 1");
        synth = cfg.synthetic();
        return 0;
      })) {
    return rc;
  }

  LayeredNetwork<float> net;
  SparseMatrix<float> y0;
  std::vector<std::size_t> truth;
  std::vector<ChallengeResult> results;
  const std::filesystem::path out_dir = cfg.output_dir;
  if (int rc = guarded(false, [&] {
        net = args.network_dir ? read_network<float>(*args.network_dir)
                               : generate_network<float>(spec);
        const std::size_t in_width = cfg.input_neurons ? cfg.input_neurons : net.width();
        y0 = synth ? synthetic_inputs<float>(synth->count, in_width, synth->density, cfg.seed)
                   : read_input_tsv<float>(cfg.inputs, in_width);
        if (y0.n_cols() != net.width()) {
          throw ShapeError("inputs have " + std::to_string(y0.n_cols()) +
                           " neurons but the network has " + std::to_string(net.width()));
        }
        if (args.truth) {
          truth = read_categories(*args.truth);
        } else {
          truth = extract_categories(oracle_infer(y0, net));
        }
        ChallengeOptions opts;
        opts.workers = cfg.workers;
        opts.representation = cfg.representation;
        opts.repetitions = cfg.repetitions;
        results = run_challenge(y0, net, truth, opts);

        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
        const auto results_path =
            args.results ? std::filesystem::path(*args.results) : out_dir / "results.jsonl";
        std::ofstream jl(results_path, args.append ? std::ios::app : std::ios::trunc);
        if (!jl) throw IoError("cannot open " + results_path.string());
        for (std::size_t i = 0; i < results.size(); ++i) {
          auto j = to_json(results[i]);
          j["repetition"] = i + 1;
          j["inputs"] = synth ? "synthetic" : "file";
          jl << j.dump() << "\n";
        }
        if (!jl) throw IoError("error writing " + results_path.string());
        write_categories(fastest(results).categories, (out_dir / "categories.tsv").string());
        if (!args.truth) write_categories(truth, (out_dir / "truth.tsv").string());
        return 0;
      })) {
    return rc;
  }

  const auto& best = fastest(results);
  auto summary = to_json(best);
  summary["repetitions"] = results.size();
  summary["inputs"] = synth ? "synthetic" : "file";
  std::cout << summary.dump() << "\n";
  for (const auto& r : results) {
    if (!r.correct) {
      std::cerr << "sdnn: computed categories differ from truth\n";
      return kIncorrect;
    }
  }
  return kOk;
}

struct FitArgs {
  std::string results;
  std::string out;
};

inline int cmd_fit(const FitArgs& args) {
  return guarded(false, [&] {
    const auto records = min_per_configuration(read_result_lines(args.results));
    const auto fit = fit_power_law(records);
    const nlohmann::json j{{"n1", fit.n1},
                           {"beta", fit.beta},
                           {"r_squared", fit.r_squared},
                           {"n_points", fit.n_points}};
    if (!args.out.empty()) {
      std::ofstream out(args.out, std::ios::trunc);
      if (!out) throw IoError("cannot open " + args.out);
      out << j.dump(2) << "\n";
    }
    std::cout << j.dump() << "\n";
    return 0;
  });
}

inline int cmd_report(const FitArgs& args) {
  return guarded(false, [&] {
    const auto records = min_per_configuration(read_result_lines(args.results));
    const auto fit = fit_power_law(records);
    const auto paths = emit_report(fit, records, reference_table(), args.out);
    std::ifstream in(paths.summary);
    std::cout << in.rdbuf();
    return 0;
  });
}

/// Entry point; argv[0] is the program name.
inline int run(int argc, const char* const* argv) {
  CLI::App app{"Sparse DNN inference benchmark"};
  app.require_subcommand(1);

  ConfigFlags gen_flags;
  auto* gen = app.add_subcommand("generate", "write a synthetic network as layer TSVs");
  gen_flags.add_network_options(*gen);

  PreprocessArgs pre_args;
  auto* pre = app.add_subcommand("preprocess", "convert MNIST IDX images to an input TSV");
  pre->add_option("--idx", pre_args.idx_path, "MNIST IDX image file")->required();
  pre->add_option("--side", pre_args.side, "target side length in pixels");
  pre->add_option("--threshold", pre_args.threshold, "binarization threshold (0-255)");
  pre->add_option("--out", pre_args.out, "output TSV path");
  pre->add_option("--limit", pre_args.limit, "convert only the first N images");

  RunArgs run_args;
  auto* runc = app.add_subcommand("run", "run the timed challenge");
  run_args.flags.add_run_options(*runc);
  runc->add_option("--network-dir", run_args.network_dir, "load layers instead of generating");
  runc->add_option("--truth", run_args.truth, "truth categories file");
  runc->add_option("--results", run_args.results, "JSON-lines result file");
  runc->add_flag("--append", run_args.append, "append to the result file");

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "fit the power-law time model");
  fit->add_option("--results", fit_args.results, "JSON-lines result file")->required();
  fit->add_option("--out", fit_args.out, "fit JSON output");

  FitArgs report_args;
  auto* rep = app.add_subcommand("report", "fit and write report files");
  rep->add_option("--results", report_args.results, "JSON-lines result file")->required();
  rep->add_option("--out", report_args.out, "report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  if (*gen) return cmd_generate(gen_flags);
  if (*pre) return cmd_preprocess(pre_args);
  if (*runc) return cmd_run(run_args);
  if (*fit) return cmd_fit(fit_args);
  if (*rep) return cmd_report(report_args);
  return kConfigError;
}

}  // namespace sdnn::cli
