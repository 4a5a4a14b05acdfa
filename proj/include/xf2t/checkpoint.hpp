#pragma once

// Checkpoint file layout:
//
//   bytes 0..7    magic "XF2TCKP1"
//   bytes 8..15   header length H, unsigned 64-bit little-endian
//   next H bytes  UTF-8 JSON header:
//                   {"config": {...ModelConfig...},
//                    "vocab": {"languages": [...], "words": [...]},
//                    "tensors": [{"name": str, "rows": int, "cols": int}, ...]}
//   remainder     tensor data in header order, row-major IEEE-754 float64,
//                 little-endian, nothing else
//
// "words" lists the vocabulary after the reserved and language tokens, in id
// order.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "xf2t/linearizer.hpp"
#include "xf2t/model.hpp"

namespace xf2t {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kCheckpointMagic = "XF2TCKP1";

struct Checkpoint {
  ModelParams params;
  Vocabulary vocab;
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"d_model", c.d_model},
          {"n_heads", c.n_heads},
          {"n_enc_layers", c.n_enc_layers},
          {"n_dec_layers", c.n_dec_layers},
          {"d_ff", c.d_ff},
          {"dropout_rate", c.dropout_rate},
          {"max_positions", c.max_positions},
          {"seed", c.seed},
          {"use_role_embeddings", c.use_role_embeddings},
          {"tie_output_embedding", c.tie_output_embedding}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("model config: expected a JSON object");
  ModelConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "vocab_size") c.vocab_size = value.get<size_t>();
    else if (key == "d_model") c.d_model = value.get<size_t>();
    else if (key == "n_heads") c.n_heads = value.get<size_t>();
    else if (key == "n_enc_layers") c.n_enc_layers = value.get<size_t>();
    else if (key == "n_dec_layers") c.n_dec_layers = value.get<size_t>();
    else if (key == "d_ff") c.d_ff = value.get<size_t>();
    else if (key == "dropout_rate") c.dropout_rate = value.get<double>();
    else if (key == "max_positions") c.max_positions = value.get<size_t>();
    else if (key == "seed") c.seed = value.get<uint64_t>();
    else if (key == "use_role_embeddings") c.use_role_embeddings = value.get<bool>();
    else if (key == "tie_output_embedding") c.tie_output_embedding = value.get<bool>();
    else throw std::invalid_argument("model config: unknown key \"" + key + "\"");
  }
  return c;
}

namespace detail {

inline void put_u64(std::ostream& out, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

inline uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw CheckpointError("checkpoint: truncated file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline void save_checkpoint(std::ostream& out, const ModelParams& params, const Vocabulary& vocab) {
  if (vocab.size() != params.config.vocab_size) {
    throw std::invalid_argument("checkpoint: vocabulary size " + std::to_string(vocab.size()) +
                                " does not match model vocab_size " +
                                std::to_string(params.config.vocab_size));
  }
  nlohmann::json header;
  header["config"] = to_json(params.config);
  header["vocab"]["languages"] = vocab.languages();
  header["vocab"]["words"] = std::vector<std::string>(
      vocab.tokens().begin() + static_cast<std::ptrdiff_t>(vocab.reserved_count()), vocab.tokens().end());
  header["tensors"] = nlohmann::json::array();
  for (const auto& [name, m] : params.tensors()) {
    header["tensors"].push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}});
  }
  const std::string h = header.dump();
  out.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  detail::put_u64(out, h.size());
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& [name, m] : params.tensors()) {
    for (Eigen::Index i = 0; i < m->size(); ++i) detail::put_u64(out, std::bit_cast<uint64_t>(m->data()[i]));
  }
  if (!out) throw CheckpointError("checkpoint: write failed");
}

inline Checkpoint load_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::string_view(magic, 8) != kCheckpointMagic) {
    throw CheckpointError("checkpoint: bad magic (not an xf2t checkpoint)");
  }
  const uint64_t len = detail::get_u64(in);
  if (len > (uint64_t{1} << 32)) throw CheckpointError("checkpoint: implausible header length");
  std::string h(len, '\0');
  if (!in.read(h.data(), static_cast<std::streamsize>(len))) throw CheckpointError("checkpoint: truncated header");
  Checkpoint ck;
  try {
    const auto header = nlohmann::json::parse(h);
    const ModelConfig config = model_config_from_json(header.at("config"));
    ck.vocab = Vocabulary(header.at("vocab").at("languages").get<std::vector<std::string>>(),
                          header.at("vocab").at("words").get<std::vector<std::string>>());
    if (ck.vocab.size() != config.vocab_size) throw CheckpointError("checkpoint: vocabulary size mismatch");
    ck.params = init_model(config);
    auto tensors = ck.params.tensors();
    const auto& listed = header.at("tensors");
    if (listed.size() != tensors.size()) throw CheckpointError("checkpoint: tensor count mismatch");
    for (size_t k = 0; k < tensors.size(); ++k) {
      const auto& [name, m] = tensors[k];
      if (listed[k].at("name").get<std::string>() != name ||
          listed[k].at("rows").get<Eigen::Index>() != m->rows() ||
          listed[k].at("cols").get<Eigen::Index>() != m->cols()) {
        throw CheckpointError("checkpoint: tensor " + std::to_string(k) + " does not match \"" + name + "\"");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint: malformed header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint: invalid header: ") + e.what());
  }
  for (auto& [name, m] : ck.params.tensors()) {
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = std::bit_cast<double>(detail::get_u64(in));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("checkpoint: trailing bytes");
  return ck;
}

inline void save_checkpoint(const std::string& path, const ModelParams& params, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("checkpoint: cannot open " + path + " for writing");
  save_checkpoint(out, params, vocab);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path);
  return load_checkpoint(in);
}

}  // namespace xf2t
