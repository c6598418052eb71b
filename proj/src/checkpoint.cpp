#include "seqtag/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace seqtag::checkpoint {
namespace {

constexpr char kMagic[8] = {'S', 'E', 'Q', 'T', 'A', 'G', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) fail("checkpoint truncated");
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) fail("checkpoint truncated");
  return v;
}

std::string read_string(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) fail("checkpoint truncated");
  return s;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t nl = s.find('\n', pos);
    if (nl == std::string::npos) {
      out.push_back(s.substr(pos));
      break;
    }
    out.push_back(s.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

std::string join_lines(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += '\n';
    out += items[i];
  }
  return out;
}

using Header = std::vector<std::pair<std::string, std::string>>;

void write_file(const std::string& path, const Header& header,
                const std::vector<trainer::TensorRef>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(header.size()));
  for (const auto& [k, v] : header) {
    write_string(out, k);
    write_string(out, v);
  }
  write_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    write_string(out, t.name);
    write_u64(out, t.data->size());
    out.write(reinterpret_cast<const char*>(t.data->data()),
              static_cast<std::streamsize>(t.data->size() * sizeof(double)));
  }
  if (!out) fail("short write while saving checkpoint: " + path);
}

struct Loaded {
  std::map<std::string, std::string> header;
  std::ifstream in;
  std::uint32_t array_count = 0;
};

Loaded open_file(const std::string& path) {
  Loaded l;
  l.in.open(path, std::ios::binary);
  if (!l.in) fail("cannot open checkpoint: " + path);
  char magic[8];
  l.in.read(magic, sizeof(magic));
  if (!l.in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    fail("not a seqtag checkpoint: " + path);
  }
  const std::uint32_t version = read_u32(l.in);
  if (version != kVersion) {
    fail("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t n = read_u32(l.in);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string k = read_string(l.in);
    std::string v = read_string(l.in);
    l.header.emplace(std::move(k), std::move(v));
  }
  l.array_count = read_u32(l.in);
  return l;
}

const std::string& header_get(const Loaded& l, const std::string& key) {
  const auto it = l.header.find(key);
  if (it == l.header.end()) fail("checkpoint header missing key '" + key + "'");
  return it->second;
}

int header_int(const Loaded& l, const std::string& key) {
  return std::stoi(header_get(l, key));
}

// Arrays must appear in exactly the registry order.
void read_tensors(Loaded& l, const std::vector<trainer::TensorRef>& tensors) {
  if (l.array_count != tensors.size()) {
    fail("checkpoint has " + std::to_string(l.array_count) + " arrays, expected " +
         std::to_string(tensors.size()));
  }
  for (const auto& t : tensors) {
    const std::string name = read_string(l.in);
    if (name != t.name) {
      fail("checkpoint array order mismatch: got '" + name + "', expected '" + t.name + "'");
    }
    const std::uint64_t n = read_u64(l.in);
    if (n != t.data->size()) {
      fail("array '" + name + "' has " + std::to_string(n) + " values, expected " +
           std::to_string(t.data->size()));
    }
    l.in.read(reinterpret_cast<char*>(t.data->data()),
              static_cast<std::streamsize>(n * sizeof(double)));
    if (!l.in) fail("checkpoint truncated in array '" + name + "'");
  }
}

Header config_header(const encoder::EncoderConfig& cfg, const std::string& kind) {
  Header h;
  h.emplace_back("kind", kind);
  h.emplace_back("num_layers", std::to_string(cfg.num_layers));
  h.emplace_back("hidden_size", std::to_string(cfg.hidden_size));
  h.emplace_back("num_heads", std::to_string(cfg.num_heads));
  h.emplace_back("ffn_size", std::to_string(cfg.ffn_size));
  h.emplace_back("max_position", std::to_string(cfg.max_position));
  h.emplace_back("vocab_size", std::to_string(cfg.vocab_size));
  h.emplace_back("num_segments", std::to_string(cfg.num_segments));
  h.emplace_back("dropout_rate", format_double(cfg.dropout_rate));
  return h;
}

encoder::EncoderConfig config_from_header(const Loaded& l) {
  encoder::EncoderConfig cfg;
  cfg.num_layers = header_int(l, "num_layers");
  cfg.hidden_size = header_int(l, "hidden_size");
  cfg.num_heads = header_int(l, "num_heads");
  cfg.ffn_size = header_int(l, "ffn_size");
  cfg.max_position = header_int(l, "max_position");
  cfg.vocab_size = header_int(l, "vocab_size");
  cfg.num_segments = header_int(l, "num_segments");
  cfg.dropout_rate = std::stod(header_get(l, "dropout_rate"));
  cfg.validate();
  return cfg;
}

corpus::Vocab vocab_from_header(const Loaded& l) {
  const auto tokens = split_lines(header_get(l, "vocab"));
  return corpus::Vocab::from_tokens(tokens, header_int(l, "min_freq"));
}

std::vector<std::string> nonspecial_tokens(const corpus::Vocab& vocab) {
  return {vocab.id_to_token().begin() + corpus::Vocab::kNumSpecials,
          vocab.id_to_token().end()};
}

}  // namespace

void save_tagger(const std::string& path, trainer::TaggerModel& model) {
  Header header = config_header(model.config, "tagger");
  header.emplace_back("entity_types", join_lines(model.tagset.entity_types()));
  header.emplace_back("tags", join_lines(model.tagset.tags()));
  header.emplace_back("vocab", join_lines(nonspecial_tokens(model.vocab)));
  header.emplace_back("min_freq", std::to_string(model.vocab.min_freq()));
  write_file(path, header, trainer::tagger_tensors(model));
}

trainer::TaggerModel load_tagger(const std::string& path) {
  Loaded l = open_file(path);
  if (header_get(l, "kind") != "tagger") {
    fail("checkpoint kind is '" + header_get(l, "kind") + "', expected 'tagger'");
  }
  const encoder::EncoderConfig cfg = config_from_header(l);
  const corpus::TagSet tagset =
      corpus::TagSet::from_entity_types(split_lines(header_get(l, "entity_types")));
  if (join_lines(tagset.tags()) != header_get(l, "tags")) {
    fail("checkpoint tag inventory does not match its entity types");
  }
  const corpus::Vocab vocab = vocab_from_header(l);
  if (vocab.size() != cfg.vocab_size) {
    fail("checkpoint vocab size does not match config");
  }

  trainer::TaggerModel model{cfg,
                             encoder::zeros_like(cfg),
                             Mat(cfg.hidden_size, tagset.num_tags()),
                             std::vector<double>(tagset.num_tags(), 0.0),
                             crf::CrfParams(tagset.num_tags()),
                             tagset,
                             vocab};
  read_tensors(l, trainer::tagger_tensors(model));
  return model;
}

void save_pretrain(const std::string& path, trainer::PretrainModel& model) {
  Header header = config_header(model.config, "pretrain");
  header.emplace_back("vocab", join_lines(nonspecial_tokens(model.vocab)));
  header.emplace_back("min_freq", std::to_string(model.vocab.min_freq()));
  write_file(path, header, trainer::pretrain_tensors(model));
}

trainer::PretrainModel load_pretrain(const std::string& path) {
  Loaded l = open_file(path);
  if (header_get(l, "kind") != "pretrain") {
    fail("checkpoint kind is '" + header_get(l, "kind") + "', expected 'pretrain'");
  }
  const encoder::EncoderConfig cfg = config_from_header(l);
  const corpus::Vocab vocab = vocab_from_header(l);
  if (vocab.size() != cfg.vocab_size) {
    fail("checkpoint vocab size does not match config");
  }
  trainer::PretrainModel model;
  model.config = cfg;
  model.enc = encoder::zeros_like(cfg);
  model.heads.mlm_w = Mat(cfg.hidden_size, cfg.vocab_size);
  model.heads.mlm_b.assign(cfg.vocab_size, 0.0);
  model.heads.nsp_w = Mat(cfg.hidden_size, 2);
  model.heads.nsp_b.assign(2, 0.0);
  model.vocab = vocab;
  read_tensors(l, trainer::pretrain_tensors(model));
  return model;
}

std::string peek_kind(const std::string& path) {
  Loaded l = open_file(path);
  return header_get(l, "kind");
}

}  // namespace seqtag::checkpoint
