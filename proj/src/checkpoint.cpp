#include "impart/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <vector>

#include "impart/nn/models.hpp"

namespace impart {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little endian");

constexpr char kMagic[8] = {'I', 'M', 'P', 'C', 'K', 'P', 'T', '\0'};

std::uint64_t fnv1a(const std::vector<char>& bytes, std::size_t count) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < count; ++i) {
    h = (h ^ static_cast<unsigned char>(bytes[i])) * 1099511628211ULL;
  }
  return h;
}

template <class T>
void put(std::vector<char>& out, const T& v) {
  const char* p = reinterpret_cast<const char*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
T take(const std::vector<char>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw std::runtime_error("checkpoint truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

nlohmann::json CheckpointMetadata::to_json() const {
  nlohmann::json j;
  j["config_hash"] = config_hash;
  j["scope_hash"] = scope_hash;
  j["dataset_fingerprint"] = dataset_fingerprint;
  j["final_loss"] = final_loss;
  j["train_accuracy"] = train_accuracy;
  j["test_accuracy"] = test_accuracy ? nlohmann::json(*test_accuracy) : nlohmann::json();
  j["extra"] = extra;
  return j;
}

CheckpointMetadata CheckpointMetadata::from_json(const nlohmann::json& j) {
  CheckpointMetadata m;
  m.config_hash = j.value("config_hash", "");
  m.scope_hash = j.value("scope_hash", "");
  m.dataset_fingerprint = j.value("dataset_fingerprint", std::uint64_t{0});
  m.final_loss = j.value("final_loss", 0.0);
  m.train_accuracy = j.value("train_accuracy", 0.0);
  if (j.contains("test_accuracy") && !j["test_accuracy"].is_null()) {
    m.test_accuracy = j["test_accuracy"].get<double>();
  }
  if (j.contains("extra")) m.extra = j["extra"];
  return m;
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
  const auto& net = ckpt.network;
  const nn::Shape in = net.input_shape(1);
  nlohmann::json header;
  header["model_id"] = net.model_id();
  header["num_classes"] = net.num_classes();
  header["input"] = {in.c, in.h, in.w};
  header["num_params"] = net.params().size();
  header["num_buffers"] = net.buffers().size();
  header["metadata"] = ckpt.metadata.to_json();
  const std::string text = header.dump();

  std::vector<char> blob(kMagic, kMagic + sizeof(kMagic));
  put(blob, kCheckpointVersion);
  put(blob, static_cast<std::uint64_t>(text.size()));
  blob.insert(blob.end(), text.begin(), text.end());
  for (float v : net.params()) put(blob, v);
  for (float v : net.buffers()) put(blob, v);
  put(blob, fnv1a(blob, blob.size()));

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + tmp.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  const std::vector<char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (blob.size() < sizeof(kMagic) + 4 + 8 + 8 ||
      std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("load_checkpoint: " + path.string() + " is not a checkpoint");
  }
  std::size_t pos = blob.size() - 8;
  const auto stored_sum = take<std::uint64_t>(blob, pos);
  if (stored_sum != fnv1a(blob, blob.size() - 8)) {
    throw std::runtime_error("load_checkpoint: checksum mismatch in " + path.string());
  }
  pos = sizeof(kMagic);
  const auto version = take<std::uint32_t>(blob, pos);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version));
  }
  const auto len = take<std::uint64_t>(blob, pos);
  if (pos + len > blob.size()) throw std::runtime_error("load_checkpoint: truncated header");
  const auto header = nlohmann::json::parse(blob.begin() + pos, blob.begin() + pos + len);
  pos += len;

  const auto input = header.at("input");
  nn::Network net = nn::build_model(header.at("model_id").get<std::string>(),
                                    header.at("num_classes").get<int>(), input.at(0).get<int>(),
                                    input.at(1).get<int>(), input.at(2).get<int>());
  if (net.params().size() != header.at("num_params").get<std::size_t>() ||
      net.buffers().size() != header.at("num_buffers").get<std::size_t>()) {
    throw std::runtime_error("load_checkpoint: parameter layout does not match model registry");
  }
  for (float& v : net.params()) v = take<float>(blob, pos);
  for (float& v : net.buffers()) v = take<float>(blob, pos);
  if (pos != blob.size() - 8) throw std::runtime_error("load_checkpoint: trailing bytes");
  return {std::move(net), CheckpointMetadata::from_json(header.at("metadata"))};
}

}  // namespace impart
