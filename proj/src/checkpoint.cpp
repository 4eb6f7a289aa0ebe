#include "connlearn/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "connlearn/errors.hpp"
#include "connlearn/io.hpp"

namespace connlearn {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

const char* stage_name(Stage s) { return s == Stage::pretrained ? "pretrained" : "finetuned"; }

std::string serialize_params(const ModelT<Matrix>& params) {
  std::string bytes;
  bytes.reserve(parameter_count(params) * sizeof(double));
  for_each_param(params, [&](const std::string&, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double v = m(i, j);
        bytes.append(reinterpret_cast<const char*>(&v), sizeof v);
      }
    }
  });
  return bytes;
}

json checkpoint_manifest(const Model& model, const TrainConfig& config, Stage stage) {
  json index = json::array();
  std::size_t offset = 0;
  for_each_param(model.params, [&](const std::string& name, const Matrix& m) {
    index.push_back(json{{"name", name}, {"shape", {m.rows(), m.cols()}}, {"offset", offset}});
    offset += static_cast<std::size_t>(m.size()) * sizeof(double);
  });
  const ModelShape& s = model.shape;
  return json{{"format_version", kCheckpointFormatVersion},
              {"stage", stage_name(stage)},
              {"seed", config.seed},
              {"config", config.to_json()},
              {"shape",
               {{"timepoints", s.timepoints},
                {"L", s.layers},
                {"m", s.heads},
                {"c", s.states},
                {"hidden", s.hidden},
                {"classifier_hidden", s.classifier_hidden}}},
              {"encoder", "multi-state stand-in: parallel two-layer graph-convolution branches, softmax "
                          "state attention, pairwise squared-cosine diversity loss"},
              {"params", std::move(index)},
              {"params_bytes", offset},
              {"creator", "connlearn 0.1.0"}};
}

void save_checkpoint(const fs::path& dir, const Model& model, const TrainConfig& config, Stage stage) {
  fs::path target = dir;
  if (target.filename().empty()) target = target.parent_path();
  fs::path tmp = target;
  tmp += ".partial";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  write_file_atomic(tmp / "params.bin", serialize_params(model.params));
  write_json(tmp / "manifest.json", checkpoint_manifest(model, config, stage));
  fs::remove_all(target);
  fs::rename(tmp, target);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const json manifest = read_json(dir / "manifest.json");
  const std::string bytes = read_file(dir / "params.bin");
  Checkpoint ck;
  try {
    if (manifest.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw SchemaError("unsupported checkpoint format_version");
    }
    const std::string stage = manifest.at("stage").get<std::string>();
    if (stage == "pretrained") ck.stage = Stage::pretrained;
    else if (stage == "finetuned") ck.stage = Stage::finetuned;
    else throw SchemaError("unknown checkpoint stage '" + stage + "'");
    ck.config = TrainConfig::from_json(manifest.at("config"));
    const json& s = manifest.at("shape");
    const ModelShape shape{s.at("timepoints").get<int>(), s.at("L").get<int>(),      s.at("m").get<int>(),
                           s.at("c").get<int>(),          s.at("hidden").get<int>(), s.at("classifier_hidden").get<int>()};
    // Fresh tree of the right shape, then overwrite every value from disk.
    ck.model = init_model(shape, 0);
    std::size_t expected = 0;
    std::vector<std::pair<std::string, Matrix*>> slots;
    for_each_param(ck.model.params, [&](const std::string& name, Matrix& m) {
      slots.emplace_back(name, &m);
      expected += static_cast<std::size_t>(m.size()) * sizeof(double);
    });
    const json& index = manifest.at("params");
    if (index.size() != slots.size()) throw SchemaError("checkpoint parameter index does not match its shape");
    if (bytes.size() != expected) {
      throw SchemaError("params.bin holds " + std::to_string(bytes.size()) + " bytes, index needs " +
                        std::to_string(expected));
    }
    for (std::size_t k = 0; k < slots.size(); ++k) {
      const json& e = index[k];
      Matrix& m = *slots[k].second;
      if (e.at("name").get<std::string>() != slots[k].first || e.at("shape")[0].get<Eigen::Index>() != m.rows() ||
          e.at("shape")[1].get<Eigen::Index>() != m.cols()) {
        throw SchemaError("checkpoint entry " + std::to_string(k) + " does not match parameter '" +
                          slots[k].first + "'");
      }
      std::size_t offset = e.at("offset").get<std::size_t>();
      if (offset + static_cast<std::size_t>(m.size()) * sizeof(double) > bytes.size()) {
        throw SchemaError("checkpoint entry '" + slots[k].first + "' points past the end of params.bin");
      }
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
          std::memcpy(&m(i, j), bytes.data() + offset, sizeof(double));
          offset += sizeof(double);
        }
      }
    }
  } catch (const json::exception& e) {
    throw SchemaError("malformed checkpoint manifest: " + std::string(e.what()));
  }
  ck.manifest = manifest;
  return ck;
}

std::string checkpoint_digest(const fs::path& dir) {
  return sha256_hex(read_file(dir / "manifest.json") + read_file(dir / "params.bin"));
}

}  // namespace connlearn
