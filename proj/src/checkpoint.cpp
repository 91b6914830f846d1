#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "synthtext/model.hpp"

namespace synthtext {

namespace {

constexpr int kCheckpointVersion = 1;

nlohmann::json tensors_to_json(neural::Parameters& p) {
  nlohmann::json j = nlohmann::json::object();
  for (auto& ref : neural::tensor_refs(p)) {
    j[ref.name] = std::vector<double>(ref.data, ref.data + ref.size());
  }
  return j;
}

void tensors_from_json(neural::Parameters& p, const nlohmann::json& j) {
  for (auto& ref : neural::tensor_refs(p)) {
    const auto& arr = j.at(ref.name);
    if (static_cast<Eigen::Index>(arr.size()) != ref.size()) {
      throw std::runtime_error(std::string("checkpoint tensor size mismatch: ") + ref.name);
    }
    for (Eigen::Index i = 0; i < ref.size(); ++i) {
      ref.data[i] = arr[static_cast<std::size_t>(i)].get<double>();
    }
  }
}

}  // namespace

void save_checkpoint(const SynthesisModel& model, const std::string& path) {
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  const auto& c = model.config();
  j["config"] = {{"arch", neural::to_string(c.arch)},
                 {"hidden_size", c.hidden_size},
                 {"vocab_size", c.vocab_size},
                 {"n_users", c.n_users},
                 {"bptt_window", c.bptt_window},
                 {"layer_norm", c.layer_norm},
                 {"seed", c.seed}};
  j["epochs_trained"] = model.epochs_trained;
  j["users"] = model.user_order;
  std::vector<std::uint32_t> symbols;
  for (char32_t s : model.vocab.symbols()) symbols.push_back(s);
  j["vocab_symbols"] = symbols;

  auto& params = const_cast<neural::Parameters&>(model.params);
  j["params"] = tensors_to_json(params);
  auto& opt = const_cast<neural::OptimizerState&>(model.opt);
  j["opt"] = {{"t", opt.t},
              {"step_size", opt.step_size},
              {"beta1", opt.beta1},
              {"beta2", opt.beta2},
              {"eps", opt.eps},
              {"m", tensors_to_json(opt.m)},
              {"v", tensors_to_json(opt.v)}};

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out << j.dump() << "\n";
}

SynthesisModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  nlohmann::json j;
  in >> j;
  if (j.at("version").get<int>() != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version in " + path);
  }

  neural::ModelConfig c;
  const auto& jc = j.at("config");
  c.arch = neural::architecture_from_string(jc.at("arch").get<std::string>());
  c.hidden_size = jc.at("hidden_size").get<int>();
  c.vocab_size = jc.at("vocab_size").get<int>();
  c.n_users = jc.at("n_users").get<int>();
  c.bptt_window = jc.at("bptt_window").get<int>();
  c.layer_norm = jc.at("layer_norm").get<bool>();
  c.seed = jc.at("seed").get<std::uint64_t>();

  SynthesisModel m;
  m.params = neural::init_parameters<double>(c);
  tensors_from_json(m.params, j.at("params"));
  m.opt = neural::make_optimizer(m.params);
  const auto& jo = j.at("opt");
  m.opt.t = jo.at("t").get<long>();
  m.opt.step_size = jo.at("step_size").get<double>();
  m.opt.beta1 = jo.at("beta1").get<double>();
  m.opt.beta2 = jo.at("beta2").get<double>();
  m.opt.eps = jo.at("eps").get<double>();
  tensors_from_json(m.opt.m, jo.at("m"));
  tensors_from_json(m.opt.v, jo.at("v"));

  m.epochs_trained = j.at("epochs_trained").get<long>();
  m.user_order = j.at("users").get<std::vector<std::string>>();
  for (int i = 0; i < static_cast<int>(m.user_order.size()); ++i) {
    m.user_index[m.user_order[i]] = i;
  }
  std::vector<char32_t> symbols;
  for (auto s : j.at("vocab_symbols")) symbols.push_back(static_cast<char32_t>(s.get<std::uint32_t>()));
  m.vocab = CharVocab(std::move(symbols));
  if (m.vocab.size() != c.vocab_size) {
    throw std::runtime_error("checkpoint vocabulary inconsistent with config");
  }
  return m;
}

}  // namespace synthtext
