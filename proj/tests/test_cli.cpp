#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "seqtag/checkpoint.hpp"
#include "seqtag/cli.hpp"
#include "seqtag/config.hpp"
#include "seqtag/trainer.hpp"
#include "testutil.hpp"

using namespace seqtag;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("seqtag_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes a synthetic corpus + config; returns the config path.
std::string setup_run(const TempDir& dir, int n_sentences, int epochs,
                      const std::string& extra = "") {
  const auto synth = testutil::make_synthetic_corpus(n_sentences, 1234);
  write(dir.file("train.tsv"), corpus::to_column_format(synth.sentences));
  std::ostringstream cfg;
  cfg << "seed = 7\n"
      << "[paths]\n"
      << "train = \"" << dir.file("train.tsv") << "\"\n"
      << "checkpoint_dir = \"" << dir.file("ckpt") << "\"\n"
      << "[tagset]\n"
      << "entity_types = [\"PER\", \"LOC\"]\n"
      << "[encoder]\n"
      << "preset = \"toy\"\n"
      << "[train]\n"
      << "epochs = " << epochs << "\n"
      << "learning_rate = 1e-3\n"
      << "batch_size = 8\n"
      << "max_len = 64\n"
      << extra;
  write(dir.file("run.toml"), cfg.str());
  return dir.file("run.toml");
}

int run_cli(std::initializer_list<std::string> args) {
  return cli::run(std::vector<std::string>(args));
}

}  // namespace

TEST_CASE("config parsing") {
  const std::string text =
      "seed = 9  # trailing comment\n"
      "[paths]\n"
      "checkpoint_dir = \"out\"\n"
      "[tagset]\n"
      "entity_types = [\"PER\", \"LOC\"]\n"
      "[encoder]\n"
      "preset = \"ernie_tiny_like\"\n"
      "[train]\n"
      "epochs = 3\n"
      "learning_rate = 2e-4\n"
      "batch_size = 4\n"
      "objective = \"mlm\"\n"
      "masking = \"dynamic\"\n"
      "freeze_encoder = true\n";
  const auto rc = config::parse_string(text);
  CHECK(rc.seed == 9);
  CHECK(rc.train.seed == 9);
  CHECK(rc.entity_types == std::vector<std::string>{"PER", "LOC"});
  CHECK(rc.preset == "ernie_tiny_like");
  CHECK(rc.train.epochs == 3);
  CHECK(rc.train.learning_rate == doctest::Approx(2e-4));
  CHECK(rc.train.batch_size == 4);
  CHECK(rc.train.objective == trainer::Objective::kMlm);
  CHECK(rc.masking == config::Masking::kDynamic);
  CHECK(rc.train.freeze_encoder);
  CHECK(rc.resolve_encoder().hidden_size == 1024);
}

TEST_CASE("config defaults mirror the published recipe") {
  const auto rc = config::parse_string("");
  CHECK(rc.train.epochs == 2);
  CHECK(rc.train.learning_rate == 5e-5);
  CHECK(rc.train.batch_size == 16);
  CHECK(rc.masking == config::Masking::kStatic);
}

TEST_CASE("config rejects unknown keys and bad types") {
  CHECK_THROWS(config::parse_string("[train]\nepochz = 2\n"));
  CHECK_THROWS(config::parse_string("[trainer]\nepochs = 2\n"));
  CHECK_THROWS(config::parse_string("[train]\nepochs = \"two\"\n"));
  CHECK_THROWS(config::parse_string("[train]\nepochs = 2.5\n"));
  CHECK_THROWS(config::parse_string("[train]\nepochs = 2\nepochs = 3\n"));
  CHECK_THROWS(config::parse_string("[tagset]\nentity_types = [\"PER\"\n"));
  CHECK_THROWS(config::parse_string("seed 9\n"));
}

TEST_CASE("explicit encoder fields") {
  const std::string text =
      "[encoder]\n"
      "num_layers = 1\n"
      "hidden_size = 16\n"
      "num_heads = 2\n"
      "ffn_size = 32\n"
      "max_position = 48\n";
  const auto rc = config::parse_string(text);
  CHECK(rc.preset.empty());
  const auto cfg = rc.resolve_encoder();
  CHECK(cfg.num_layers == 1);
  CHECK(cfg.hidden_size == 16);
  CHECK(cfg.max_position == 48);
  CHECK(cfg.num_segments == 2);
}

TEST_CASE("missing referenced paths fail validation") {
  auto rc = config::parse_string("[paths]\ntrain = \"/nonexistent/file.tsv\"\n");
  CHECK_THROWS(rc.validate());
}

TEST_CASE("checkpoint round trip preserves predictions bitwise") {
  TempDir dir;
  const auto synth = testutil::make_synthetic_corpus(12, 55);
  const auto tagset = corpus::TagSet::from_entity_types(synth.entity_types);
  const auto vocab = corpus::build_vocab(synth.sentences, 1);
  trainer::TaggerModel model =
      trainer::assemble_tagger(encoder::preset("toy"), tagset, vocab, 77);
  trainer::TrainConfig cfg;
  cfg.epochs = 2;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 4;
  trainer::finetune(model, synth.sentences, cfg);

  const std::string path = dir.file("model.ckpt");
  checkpoint::save_tagger(path, model);
  trainer::TaggerModel loaded = checkpoint::load_tagger(path);

  CHECK(loaded.config.hidden_size == model.config.hidden_size);
  CHECK(loaded.enc.tok_emb.data == model.enc.tok_emb.data);
  CHECK(loaded.proj_w.data == model.proj_w.data);
  CHECK(loaded.crf_params.transitions.data == model.crf_params.transitions.data);
  CHECK(loaded.tagset.tags() == model.tagset.tags());
  CHECK(loaded.vocab.id_to_token() == model.vocab.id_to_token());

  for (const auto& s : synth.sentences) {
    CHECK(trainer::predict_tags(loaded, s.tokens) == trainer::predict_tags(model, s.tokens));
  }

  // same model saved twice -> identical bytes
  const std::string path2 = dir.file("model2.ckpt");
  checkpoint::save_tagger(path2, model);
  CHECK(slurp(path) == slurp(path2));

  CHECK(checkpoint::peek_kind(path) == "tagger");
  CHECK_THROWS(checkpoint::load_pretrain(path));
}

TEST_CASE("pretrain checkpoint round trip") {
  TempDir dir;
  const auto synth = testutil::make_synthetic_corpus(6, 66);
  const auto vocab = corpus::build_vocab(synth.sentences, 1);
  trainer::PretrainModel model =
      trainer::assemble_pretrain(encoder::preset("toy"), vocab, 88);
  const std::string path = dir.file("pre.ckpt");
  checkpoint::save_pretrain(path, model);
  trainer::PretrainModel loaded = checkpoint::load_pretrain(path);
  CHECK(loaded.enc.tok_emb.data == model.enc.tok_emb.data);
  CHECK(loaded.heads.mlm_w.data == model.heads.mlm_w.data);
  CHECK(checkpoint::peek_kind(path) == "pretrain");
}

TEST_CASE("corrupt checkpoints are rejected") {
  TempDir dir;
  write(dir.file("bad.ckpt"), "not a checkpoint");
  CHECK_THROWS(checkpoint::load_tagger(dir.file("bad.ckpt")));
  CHECK_THROWS(checkpoint::load_tagger(dir.file("missing.ckpt")));
}

TEST_CASE("cli: no arguments exits 2 and lists subcommands") {
  CHECK(run_cli({}) == 2);
  CHECK(run_cli({"frobnicate"}) == 2);
}

TEST_CASE("cli: train then eval and predict round trip") {
  TempDir dir;
  const std::string cfg = setup_run(dir, 16, 2);

  CHECK(run_cli({"train", "--config", cfg}) == 0);
  const std::string ckpt = dir.file("ckpt") + "/model.ckpt";
  CHECK(fs::exists(ckpt));

  // eval against the training file via the checkpoint
  CHECK(run_cli({"eval", "--gold", dir.file("train.tsv"), "--ckpt", ckpt, "--out",
                 dir.file("report.txt"), "--json", dir.file("report.json")}) == 0);
  const std::string report = slurp(dir.file("report.txt"));
  CHECK(report.find("Models") != std::string::npos);
  CHECK(slurp(dir.file("report.json")).find("num_gold") != std::string::npos);

  // predict emits parseable column output
  write(dir.file("raw.txt"), "abAB\ncd01\n");
  CHECK(run_cli({"predict", "--ckpt", ckpt, "--input", dir.file("raw.txt"), "--out",
                 dir.file("tagged.tsv")}) == 0);
  const auto tagset = corpus::TagSet::from_entity_types({"PER", "LOC"});
  const auto parsed = corpus::parse_column_file(slurp(dir.file("tagged.tsv")), tagset);
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0].tokens == std::vector<std::string>{"a", "b", "A", "B"});
  CHECK(parsed[0].tags.size() == 4);

  // inspect prints the config
  CHECK(run_cli({"inspect", "--ckpt", ckpt}) == 0);
  CHECK(run_cli({"inspect", "--ckpt", ckpt, "--attention", "--text", "ab", "--layer",
                 "1", "--head", "1"}) == 0);
}

TEST_CASE("cli: eval with a perfect prediction file prints 100s") {
  TempDir dir;
  const std::string cfg = setup_run(dir, 8, 1);
  CHECK(run_cli({"eval", "--config", cfg, "--gold", dir.file("train.tsv"), "--pred",
                 dir.file("train.tsv"), "--out", dir.file("r.txt")}) == 0);
  const std::string report = slurp(dir.file("r.txt"));
  CHECK(report.find("100.00") != std::string::npos);
}

TEST_CASE("cli: determinism of checkpoints and reports across reruns") {
  TempDir dir;
  const std::string cfg = setup_run(dir, 12, 2);
  const std::string ckpt = dir.file("ckpt") + "/model.ckpt";

  CHECK(run_cli({"train", "--config", cfg}) == 0);
  const std::string bytes1 = slurp(ckpt);
  CHECK(run_cli({"eval", "--gold", dir.file("train.tsv"), "--ckpt", ckpt, "--out",
                 dir.file("r1.txt")}) == 0);

  CHECK(run_cli({"train", "--config", cfg}) == 0);
  const std::string bytes2 = slurp(ckpt);
  CHECK(run_cli({"eval", "--gold", dir.file("train.tsv"), "--ckpt", ckpt, "--out",
                 dir.file("r2.txt")}) == 0);

  CHECK(bytes1 == bytes2);
  CHECK(slurp(dir.file("r1.txt")) == slurp(dir.file("r2.txt")));
}

TEST_CASE("cli: preprocess emits JSONL for all three kinds") {
  TempDir dir;
  const std::string cfg = setup_run(dir, 4, 1);
  write(dir.file("text.txt"), "abcdefgh\nijklmnop\n\nqrstuvwx\nyzabcdef\n");
  write(dir.file("dialogues.txt"), "ab\ncd\n\nef\ngh\n");

  CHECK(run_cli({"preprocess", "--config", cfg, "--emit", "mask", "--input",
                 dir.file("text.txt"), "--out", dir.file("mask.jsonl")}) == 0);
  std::istringstream mask_lines(slurp(dir.file("mask.jsonl")));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(mask_lines, line)) {
    ++lines;
    CHECK(line.find("\"strategy\":\"static\"") != std::string::npos);
  }
  CHECK(lines == 4);

  CHECK(run_cli({"preprocess", "--config", cfg, "--emit", "nsp", "--input",
                 dir.file("text.txt"), "--out", dir.file("nsp.jsonl"), "--count",
                 "32"}) == 0);
  std::istringstream nsp_lines(slurp(dir.file("nsp.jsonl")));
  lines = 0;
  while (std::getline(nsp_lines, line)) {
    ++lines;
    CHECK(line.find("\"is_next\":") != std::string::npos);
  }
  CHECK(lines == 32);

  CHECK(run_cli({"preprocess", "--config", cfg, "--emit", "dlm", "--input",
                 dir.file("dialogues.txt"), "--out", dir.file("dlm.jsonl")}) == 0);
  std::istringstream dlm_lines(slurp(dir.file("dlm.jsonl")));
  lines = 0;
  while (std::getline(dlm_lines, line)) {
    ++lines;
    CHECK(line.find("\"is_real\":") != std::string::npos);
  }
  CHECK(lines == 2);

  // dynamic plans across epochs
  CHECK(run_cli({"preprocess", "--config", cfg, "--emit", "mask", "--masking",
                 "dynamic", "--plan-epochs", "3", "--input", dir.file("text.txt"),
                 "--out", dir.file("dyn.jsonl")}) == 0);
  std::istringstream dyn_lines(slurp(dir.file("dyn.jsonl")));
  lines = 0;
  while (std::getline(dyn_lines, line)) ++lines;
  CHECK(lines == 12);
}

TEST_CASE("cli: pretrain then warm-started train") {
  TempDir dir;
  const auto synth = testutil::make_synthetic_corpus(10, 2024);
  write(dir.file("train.tsv"), corpus::to_column_format(synth.sentences));
  // pretraining text shares the alphabet with the corpus
  std::ostringstream text;
  for (const auto& s : synth.sentences) {
    for (const auto& t : s.tokens) text << t;
    text << "\n";
  }
  write(dir.file("text.txt"), text.str());

  std::ostringstream cfg;
  cfg << "seed = 3\n"
      << "[paths]\n"
      << "train = \"" << dir.file("train.tsv") << "\"\n"
      << "pretrain_text = \"" << dir.file("text.txt") << "\"\n"
      << "checkpoint_dir = \"" << dir.file("ckpt") << "\"\n"
      << "[tagset]\n"
      << "entity_types = [\"PER\", \"LOC\"]\n"
      << "[train]\n"
      << "epochs = 1\nlearning_rate = 1e-3\nbatch_size = 4\nmax_len = 64\n"
      << "objective = \"mlm\"\n";
  write(dir.file("run.toml"), cfg.str());

  CHECK(run_cli({"pretrain", "--config", dir.file("run.toml")}) == 0);
  const std::string pre = dir.file("ckpt") + "/pretrain.ckpt";
  CHECK(fs::exists(pre));

  // warm start: same config plus init_checkpoint
  std::ostringstream cfg2;
  cfg2 << "seed = 3\n"
       << "[paths]\n"
       << "train = \"" << dir.file("train.tsv") << "\"\n"
       << "checkpoint_dir = \"" << dir.file("ckpt2") << "\"\n"
       << "init_checkpoint = \"" << pre << "\"\n"
       << "[tagset]\n"
       << "entity_types = [\"PER\", \"LOC\"]\n"
       << "[train]\n"
       << "epochs = 1\nlearning_rate = 1e-3\nbatch_size = 4\nmax_len = 64\n";
  write(dir.file("run2.toml"), cfg2.str());
  CHECK(run_cli({"train", "--config", dir.file("run2.toml")}) == 0);
  CHECK(fs::exists(dir.file("ckpt2") + "/model.ckpt"));
}

TEST_CASE("cli: runtime failures exit 1") {
  TempDir dir;
  const std::string cfg = setup_run(dir, 4, 1);
  CHECK(run_cli({"predict", "--ckpt", dir.file("nope.ckpt"), "--input",
                 dir.file("train.tsv")}) == 1);
  CHECK(run_cli({"eval", "--gold", dir.file("train.tsv")}) == 1);  // neither pred nor ckpt
  write(dir.file("bad.toml"), "[train]\nepochs = \"x\"\n");
  CHECK(run_cli({"train", "--config", dir.file("bad.toml")}) == 1);
}

TEST_CASE("cli: flag overrides beat config file values") {
  TempDir dir;
  const std::string cfg = setup_run(dir, 8, 2);
  const std::string ckpt = dir.file("ckpt") + "/model.ckpt";

  // a --seed override must change the trained weights
  CHECK(run_cli({"train", "--config", cfg}) == 0);
  const std::string base = slurp(ckpt);
  CHECK(run_cli({"train", "--config", cfg, "--seed", "99"}) == 0);
  CHECK(slurp(ckpt) != base);
  // and the same override twice reproduces itself
  const std::string overridden = slurp(ckpt);
  CHECK(run_cli({"train", "--config", cfg, "--seed", "99"}) == 0);
  CHECK(slurp(ckpt) == overridden);
}
