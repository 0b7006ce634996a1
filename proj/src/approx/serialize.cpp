#include "recoverkit/approx/serialize.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace recoverkit::approx {

namespace {
constexpr int kFormatVersion = 1;
}

void save_net(const std::string& path, const NetSpec& spec, const ParamVector& params) {
  if (params.size() != param_count(spec))
    throw std::invalid_argument("save_net: params do not match spec");
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["spec"]["input_dim"] = spec.input_dim;
  j["spec"]["hidden"] = spec.hidden;
  j["spec"]["output_dim"] = spec.output_dim;
  j["spec"]["output_activation"] =
      spec.output == OutputActivation::tanh_out ? "tanh" : "linear";
  j["spec"]["seed"] = spec.seed;
  auto& arr = j["params"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < params.size(); ++i) arr.push_back(params[i]);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_net: cannot open " + path);
  out << j.dump(1) << "\n";
  if (!out.good()) throw std::runtime_error("save_net: write failed for " + path);
}

std::pair<NetSpec, ParamVector> load_net(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_net: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("load_net: malformed JSON in " + path + ": " + e.what());
  }
  if (!j.contains("format_version") || j["format_version"].get<int>() != kFormatVersion)
    throw std::runtime_error("load_net: unsupported format_version in " + path);
  if (!j.contains("spec") || !j.contains("params"))
    throw std::runtime_error("load_net: missing spec/params in " + path);
  const auto& js = j["spec"];
  NetSpec spec;
  spec.input_dim = js.at("input_dim").get<int>();
  spec.hidden = js.at("hidden").get<std::vector<int>>();
  spec.output_dim = js.at("output_dim").get<int>();
  const std::string act = js.at("output_activation").get<std::string>();
  if (act == "tanh")
    spec.output = OutputActivation::tanh_out;
  else if (act == "linear")
    spec.output = OutputActivation::linear;
  else
    throw std::runtime_error("load_net: unknown output_activation '" + act + "'");
  spec.seed = js.at("seed").get<std::uint64_t>();
  const auto& arr = j["params"];
  if (static_cast<int>(arr.size()) != param_count(spec))
    throw std::runtime_error("load_net: param count does not match spec in " + path);
  ParamVector params(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i)
    params[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  if (!params.allFinite())
    throw std::runtime_error("load_net: non-finite parameter in " + path);
  return {spec, params};
}

}  // namespace recoverkit::approx
