#include "seqtag/config.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace seqtag::config {
namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

// Minimal TOML subset: [section] headers, key = value with string, integer,
// float, boolean and string-array values, # comments.
struct Value {
  enum class Kind { kString, kNumber, kBool, kStringArray } kind;
  std::string str;
  double num = 0.0;
  bool boolean = false;
  std::vector<std::string> array;
};

using Table = std::map<std::string, std::map<std::string, Value>>;

std::string strip(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string parse_quoted(std::string_view s, const std::string& where) {
  if (s.size() < 2 || s.front() != '"' || s.back() != '"') {
    fail(where + ": expected a quoted string, got '" + std::string(s) + "'");
  }
  return std::string(s.substr(1, s.size() - 2));
}

Value parse_value(std::string_view raw, const std::string& where) {
  Value v{};
  const std::string s = strip(raw);
  if (s.empty()) fail(where + ": missing value");
  if (s.front() == '"') {
    v.kind = Value::Kind::kString;
    v.str = parse_quoted(s, where);
    return v;
  }
  if (s.front() == '[') {
    if (s.back() != ']') fail(where + ": unterminated array");
    v.kind = Value::Kind::kStringArray;
    std::string inner = s.substr(1, s.size() - 2);
    std::size_t pos = 0;
    while (pos < inner.size()) {
      std::size_t comma = inner.find(',', pos);
      if (comma == std::string::npos) comma = inner.size();
      const std::string item = strip(std::string_view(inner).substr(pos, comma - pos));
      if (!item.empty()) v.array.push_back(parse_quoted(item, where));
      pos = comma + 1;
    }
    return v;
  }
  if (s == "true" || s == "false") {
    v.kind = Value::Kind::kBool;
    v.boolean = s == "true";
    return v;
  }
  try {
    std::size_t used = 0;
    v.num = std::stod(s, &used);
    if (used != s.size()) fail(where + ": trailing characters after number '" + s + "'");
  } catch (const std::invalid_argument&) {
    fail(where + ": cannot parse value '" + s + "'");
  }
  v.kind = Value::Kind::kNumber;
  return v;
}

// Strips a trailing comment, respecting quoted strings.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

Table parse_table(const std::string& text, const std::string& origin) {
  Table table;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    const std::string line = strip(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(where + ": unterminated section header");
      section = strip(std::string_view(line).substr(1, line.size() - 2));
      if (section.empty()) fail(where + ": empty section name");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail(where + ": expected 'key = value'");
    const std::string key = strip(std::string_view(line).substr(0, eq));
    if (key.empty()) fail(where + ": empty key");
    if (!table[section].emplace(key, parse_value(line.substr(eq + 1), where)).second) {
      fail(where + ": duplicate key '" + key + "'");
    }
  }
  return table;
}

class Section {
 public:
  Section(const Table& table, std::string name, const std::string& origin)
      : name_(std::move(name)), origin_(origin) {
    const auto it = table.find(name_);
    if (it != table.end()) values_ = &it->second;
  }

  bool has(const std::string& key) const {
    return values_ != nullptr && values_->count(key) > 0;
  }

  std::string get_string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const Value& v = fetch(key);
    if (v.kind != Value::Kind::kString) type_error(key, "string");
    return v.str;
  }
  double get_number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const Value& v = fetch(key);
    if (v.kind != Value::Kind::kNumber) type_error(key, "number");
    return v.num;
  }
  int get_int(const std::string& key, int fallback) {
    const double d = get_number(key, fallback);
    const int i = static_cast<int>(d);
    if (static_cast<double>(i) != d) type_error(key, "integer");
    return i;
  }
  bool get_bool(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Value& v = fetch(key);
    if (v.kind != Value::Kind::kBool) type_error(key, "boolean");
    return v.boolean;
  }
  std::vector<std::string> get_string_array(const std::string& key) {
    if (!has(key)) return {};
    const Value& v = fetch(key);
    if (v.kind != Value::Kind::kStringArray) type_error(key, "string array");
    return v.array;
  }

  void check_known(std::initializer_list<const char*> known) const {
    if (values_ == nullptr) return;
    for (const auto& [key, value] : *values_) {
      bool ok = false;
      for (const char* k : known) ok |= key == k;
      if (!ok) {
        fail(origin_ + ": unknown key '" + key + "' in section [" + name_ + "]");
      }
    }
  }

 private:
  const Value& fetch(const std::string& key) const { return values_->at(key); }
  [[noreturn]] void type_error(const std::string& key, const char* want) const {
    fail(origin_ + ": [" + name_ + "] " + key + " must be a " + want);
  }

  std::string name_;
  const std::string& origin_;
  const std::map<std::string, Value>* values_ = nullptr;
};

void check_path(const std::string& what, const std::string& path) {
  if (path.empty()) return;
  if (!std::filesystem::exists(path)) {
    fail("config path for " + what + " does not exist: " + path);
  }
}

}  // namespace

Masking masking_from_name(const std::string& name) {
  if (name == "static") return Masking::kStatic;
  if (name == "dynamic") return Masking::kDynamic;
  if (name == "span") return Masking::kSpan;
  fail("unknown masking strategy '" + name + "'; valid: static, dynamic, span");
}

const char* masking_name(Masking m) {
  switch (m) {
    case Masking::kStatic: return "static";
    case Masking::kDynamic: return "dynamic";
    case Masking::kSpan: return "span";
  }
  return "?";
}

encoder::EncoderConfig RunConfig::resolve_encoder() const {
  encoder::EncoderConfig cfg;
  if (!preset.empty()) {
    cfg = encoder::preset(preset);
    if (encoder_fields.dropout_rate != 0.0) cfg.dropout_rate = encoder_fields.dropout_rate;
    if (encoder_fields.max_position != 0) cfg.max_position = encoder_fields.max_position;
  } else {
    cfg = encoder_fields;
    if (cfg.num_segments == 0) cfg.num_segments = 2;
  }
  return cfg;
}

void RunConfig::validate() const {
  check_path("paths.train", train_path);
  check_path("paths.dev", dev_path);
  check_path("paths.test", test_path);
  check_path("paths.pretrain_text", pretrain_text_path);
  check_path("paths.lexicon", lexicon_path);
  check_path("paths.init_checkpoint", init_checkpoint);
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) fail("mask_rate must be in (0, 1)");
  if (min_freq < 1) fail("min_freq must be >= 1");
  train.validate();
}

RunConfig parse_string(const std::string& text, const std::string& origin) {
  const Table table = parse_table(text, origin);
  for (const auto& [section, values] : table) {
    if (section != "" && section != "paths" && section != "tagset" &&
        section != "encoder" && section != "train") {
      fail(origin + ": unknown section [" + section + "]");
    }
  }

  RunConfig rc;
  Section root(table, "", origin);
  root.check_known({"seed"});
  rc.seed = static_cast<std::uint64_t>(root.get_number("seed", 42));

  Section paths(table, "paths", origin);
  paths.check_known({"train", "dev", "test", "pretrain_text", "lexicon",
                     "checkpoint_dir", "init_checkpoint"});
  rc.train_path = paths.get_string("train", "");
  rc.dev_path = paths.get_string("dev", "");
  rc.test_path = paths.get_string("test", "");
  rc.pretrain_text_path = paths.get_string("pretrain_text", "");
  rc.lexicon_path = paths.get_string("lexicon", "");
  rc.checkpoint_dir = paths.get_string("checkpoint_dir", "checkpoints");
  rc.init_checkpoint = paths.get_string("init_checkpoint", "");

  Section tagset(table, "tagset", origin);
  tagset.check_known({"entity_types"});
  rc.entity_types = tagset.get_string_array("entity_types");

  Section enc(table, "encoder", origin);
  enc.check_known({"preset", "num_layers", "hidden_size", "num_heads", "ffn_size",
                   "max_position", "dropout_rate"});
  rc.preset = enc.get_string("preset", enc.has("num_layers") ? "" : "toy");
  rc.encoder_fields.num_layers = enc.get_int("num_layers", 0);
  rc.encoder_fields.hidden_size = enc.get_int("hidden_size", 0);
  rc.encoder_fields.num_heads = enc.get_int("num_heads", 0);
  rc.encoder_fields.ffn_size = enc.get_int("ffn_size", 0);
  rc.encoder_fields.max_position = enc.get_int("max_position", 0);
  rc.encoder_fields.dropout_rate = enc.get_number("dropout_rate", 0.0);

  Section train(table, "train", origin);
  train.check_known({"epochs", "learning_rate", "batch_size", "max_len", "objective",
                     "masking", "min_freq", "mask_rate", "freeze_encoder"});
  rc.train.epochs = train.get_int("epochs", 2);
  rc.train.learning_rate = train.get_number("learning_rate", 5e-5);
  rc.train.batch_size = train.get_int("batch_size", 16);
  rc.train.max_len = train.get_int("max_len", 128);
  rc.train.objective =
      trainer::objective_from_name(train.get_string("objective", "finetune_ner"));
  rc.masking = masking_from_name(train.get_string("masking", "static"));
  rc.min_freq = train.get_int("min_freq", 1);
  rc.mask_rate = train.get_number("mask_rate", 0.15);
  rc.train.freeze_encoder = train.get_bool("freeze_encoder", false);
  rc.train.seed = rc.seed;
  return rc;
}

RunConfig load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), path);
}

}  // namespace seqtag::config
