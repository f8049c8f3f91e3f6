#pragma once

// Challenge run configuration, read from key=value files and overridden by
// command-line flags. Keys match the field names below.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "sdnn/dataio.hpp"
#include "sdnn/engine.hpp"
#include "sdnn/error.hpp"
#include "sdnn/kv.hpp"
#include "sdnn/radixnet.hpp"

namespace sdnn {

struct SyntheticInputs {
  std::size_t count = 0;
  double density = 0.0;
};

struct RunConfig {
  std::size_t neurons = 0;  // 0: radices x kron_width decides
  std::size_t layers = 1;
  std::vector<std::size_t> radices;  // empty: fan-in-32 factorization of neurons
  std::optional<std::size_t> kron_width;
  double weight_value = 0.0625;
  std::optional<double> bias_value;  // unset: default_bias(width)
  std::string inputs = "synthetic:64:0.2";
  std::size_t input_neurons = 0;  // width of an input TSV; 0: network width
  std::size_t workers = 1;
  Representation representation = Representation::sparse;
  std::size_t repetitions = 3;
  std::string output_dir = ".";
  std::uint64_t seed = 1;

  /// Resolves to a validated network spec. Throws InvariantError naming the
  /// offending field.
  NetworkSpec network_spec() const {
    NetworkSpec spec;
    if (radices.empty()) {
      if (neurons == 0) throw InvariantError("neurons: required when radices is not given");
      if (kron_width) throw InvariantError("kron_width: requires radices");
      spec = challenge_spec(neurons, layers);
    } else {
      spec.radices = radices;
      spec.n_layers = layers;
      spec.kron_width = kron_width.value_or(1);
    }
    spec.weight_value = weight_value;
    spec.validate();
    spec.bias_value = bias_value.value_or(default_bias(spec.width()));
    spec.validate();
    if (neurons != 0 && neurons != spec.width()) {
      throw InvariantError("neurons: " + std::to_string(neurons) +
                           " does not equal radices product x kron_width = " +
                           std::to_string(spec.width()));
    }
    if (repetitions < 1) throw InvariantError("repetitions: must be >= 1");
    return spec;
  }

  /// Parsed `synthetic:<count>:<density>`, or nullopt for a file path.
  std::optional<SyntheticInputs> synthetic() const {
    const std::string prefix = "synthetic:";
    if (inputs.rfind(prefix, 0) != 0) return std::nullopt;
    const auto rest = inputs.substr(prefix.size());
    const auto colon = rest.find(':');
    if (colon == std::string::npos) {
      throw InvariantError("inputs: expected synthetic:<count>:<density>");
    }
    SyntheticInputs s;
    try {
      std::size_t used = 0;
      s.count = std::stoull(rest.substr(0, colon), &used);
      if (used != colon) throw std::invalid_argument("count");
      const auto dens = rest.substr(colon + 1);
      s.density = std::stod(dens, &used);
      if (used != dens.size()) throw std::invalid_argument("density");
    } catch (const std::logic_error&) {
      throw InvariantError("inputs: expected synthetic:<count>:<density>, got '" + inputs + "'");
    }
    if (!(s.density >= 0.0 && s.density <= 1.0)) {
      throw InvariantError("inputs: synthetic density must be in [0, 1]");
    }
    return s;
  }
};

namespace detail {

template <typename N>
N parse_field(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    N out{};
    if constexpr (std::is_floating_point_v<N>) {
      out = static_cast<N>(std::stod(value, &used));
    } else {
      if (!value.empty() && value.front() == '-') throw std::invalid_argument("negative");
      out = static_cast<N>(std::stoull(value, &used));
    }
    if (used != value.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::logic_error&) {
    throw InvariantError(key + ": malformed value '" + value + "'");
  }
}

}  // namespace detail

/// Applies every recognized key onto `cfg`. Unknown keys are rejected.
inline void apply_key_values(RunConfig& cfg, const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "neurons") cfg.neurons = detail::parse_field<std::size_t>(key, value);
    else if (key == "layers") cfg.layers = detail::parse_field<std::size_t>(key, value);
    else if (key == "radices") cfg.radices = parse_radices(value);
    else if (key == "kron_width") cfg.kron_width = detail::parse_field<std::size_t>(key, value);
    else if (key == "weight_value") cfg.weight_value = detail::parse_field<double>(key, value);
    else if (key == "bias_value") cfg.bias_value = detail::parse_field<double>(key, value);
    else if (key == "inputs") cfg.inputs = value;
    else if (key == "input_neurons") cfg.input_neurons = detail::parse_field<std::size_t>(key, value);
    else if (key == "workers") cfg.workers = detail::parse_field<std::size_t>(key, value);
    else if (key == "representation") cfg.representation = parse_representation(value);
    else if (key == "repetitions") cfg.repetitions = detail::parse_field<std::size_t>(key, value);
    else if (key == "output_dir") cfg.output_dir = value;
    else if (key == "seed") cfg.seed = detail::parse_field<std::uint64_t>(key, value);
    else throw InvariantError(key + ": unknown configuration key");
  }
}

}  // namespace sdnn
