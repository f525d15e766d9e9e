#include "cohsync/io.hpp"

#include <fstream>
#include <sstream>

#include "detail_json.hpp"

namespace cohsync::io {

using detail::Json;

model::AgentModel parse_model(const std::string& json_text) {
  const Json root = detail::parse_json(json_text, "model");
  if (!root.is_object()) throw ConfigError("model: expected an object");
  for (const char* key : {"A", "B", "C"}) {
    if (!root.contains(key)) throw ConfigError(std::string("model: missing field ") + key);
  }
  model::AgentModel m;
  m.A = detail::matrix_from_json(root["A"], "model.A");
  m.B = detail::matrix_from_json(root["B"], "model.B");
  m.C = detail::matrix_from_json(root["C"], "model.C");
  m.E = root.contains("E") ? detail::matrix_from_json(root["E"], "model.E")
                           : Matrix(m.A.rows(), 0);
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return m;
}

model::AgentModel read_model_file(const std::filesystem::path& path) {
  return parse_model(read_text_file(path));
}

std::string model_to_json(const model::AgentModel& model) {
  Json root;
  root["A"] = detail::matrix_to_json(model.A);
  root["B"] = detail::matrix_to_json(model.B);
  root["C"] = detail::matrix_to_json(model.C);
  root["E"] = detail::matrix_to_json(model.E);
  return root.dump(2) + "\n";
}

std::string design_to_json(const sim::Design& design) {
  Json root;
  if (const auto* nd = std::get_if<protocol::NoncollabDesign>(&design)) {
    const auto& tr = nd->transform;
    root["protocol"] = "noncollaborative";
    root["delta"] = nd->delta;
    root["delta_1"] = nd->delta_1;
    root["delta_bar"] = nd->delta_bar;
    root["d"] = nd->d;
    root["d_upper_bound"] = nd->d_upper_bound();
    root["output_norm"] = nd->output_norm;
    root["S"] = detail::matrix_to_json(tr.S);
    root["T"] = detail::matrix_to_json(tr.T);
    root["A_tilde"] = detail::matrix_to_json(tr.A_tilde);
    root["B_tilde"] = detail::matrix_to_json(tr.B_tilde);
    root["C_tilde"] = detail::matrix_to_json(tr.C_tilde);
    root["H1"] = detail::matrix_to_json(nd->H1);
    root["P"] = detail::matrix_to_json(nd->P);
    root["gain_row"] = detail::matrix_to_json(nd->gain_row);
    root["rho_kernel"] = detail::matrix_to_json(nd->rho_kernel);
  } else {
    const auto& cd = std::get<protocol::CollabDesign>(design);
    root["protocol"] = "collaborative";
    root["delta"] = cd.delta;
    root["d"] = cd.d;
    root["eta"] = cd.eta;
    root["epsilon"] = cd.epsilon;
    root["Q"] = detail::matrix_to_json(cd.Q);
    root["alpha_grid_ratio"] = protocol::PAlphaCache::kRatio;
    root["P_alpha_at_1"] = detail::matrix_to_json(*cd.cache->at_index(0));
  }
  return root.dump(2) + "\n";
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace cohsync::io
