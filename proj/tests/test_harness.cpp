#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "mcrn/harness.hpp"

using namespace mcrn;

namespace {

// small geometry that clusters cleanly and trains in milliseconds
const char* kBaseText =
    "[run]\n"
    "seed = 11\n"
    "epochs = 3\n"
    "[data]\n"
    "input_dim = 8\n"
    "augment_sigma = 0.02\n"
    "query_fraction = 0.3\n"
    "[data.source]\n"
    "identities = 6\n"
    "samples = 10\n"
    "noise = 0.1\n"
    "shift = 0\n"
    "distortion = 0\n"
    "[data.target]\n"
    "identities = 6\n"
    "samples = 10\n"
    "noise = 0.1\n"
    "shift = 0.2\n"
    "distortion = 0.05\n"
    "[encoder]\n"
    "hidden = 12\n"
    "feature_dim = 8\n"
    "[cluster]\n"
    "eps = 0.3\n"
    "min_pts = 3\n"
    "[memory]\n"
    "k = 2\n"
    "[loss]\n"
    "temperature = 0.05\n"
    "scope = dscl\n"
    "synthesis = soni\n"
    "alpha = 0.1\n"
    "[optim]\n"
    "lr = 0.001\n"
    "[batch]\n"
    "p = 2\n";

ExperimentConfig base_config() { return parse_config_text(kBaseText); }

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

int columns_of(const std::string& line) {
  int commas = 0;
  for (char c : line) commas += (c == ',') ? 1 : 0;
  return commas + 1;
}

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("metric records serialize with fixed keys and no timing") {
  MetricsRecord r;
  r.epoch = 3;
  r.mean_loss = 0.5;
  r.mean_ap = 1.0;
  r.cmc1 = 1.0;
  r.cmc5 = 0.25;
  r.cmc10 = 1.0;
  r.purity = 0.875;
  r.n_target_classes = 7;
  r.domain_distance = 0.125;
  r.wall_clock_sec = 99.0;  // must not appear
  CHECK(metrics_json_line(r) ==
        "{\"epoch\": 3, \"mean_loss\": 0.5, \"map\": 1, \"cmc1\": 1, "
        "\"cmc5\": 0.25, \"cmc10\": 1, \"purity\": 0.875, "
        "\"n_target_classes\": 7, \"domain_distance\": 0.125}");
}

TEST_CASE("identical config and seed reproduce the metric stream") {
  const ExperimentConfig config = base_config();
  std::ostringstream a, b;
  RunOptions opts_a;
  opts_a.metrics_out = &a;
  RunOptions opts_b;
  opts_b.metrics_out = &b;
  const RunResult ra = run_experiment(config, opts_a);
  const RunResult rb = run_experiment(config, opts_b);

  CHECK(a.str() == b.str());
  CHECK(ra.records.size() == 3);
  CHECK(ra.records.front().epoch == 1);
  CHECK(ra.records.back().epoch == 3);

  // the stream is exactly the serialized records
  const auto lines = lines_of(a.str());
  REQUIRE(lines.size() == ra.records.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    CHECK(lines[i] == metrics_json_line(ra.records[i]));
  }
  for (const auto& rec : ra.records) {
    CHECK(rec.mean_ap >= 0.0);
    CHECK(rec.mean_ap <= 1.0);
    CHECK(rec.purity >= 0.0);
    CHECK(rec.purity <= 1.0);
    CHECK(rec.n_target_classes >= 2);
  }

  // a different seed takes a different trajectory
  ExperimentConfig other = config;
  other.seed = 12;
  std::ostringstream c;
  RunOptions opts_c;
  opts_c.metrics_out = &c;
  run_experiment(other, opts_c);
  CHECK(c.str() != a.str());
}

TEST_CASE("zero epochs evaluates the untrained encoder once") {
  ExperimentConfig config = base_config();
  config.epochs = 0;
  const RunResult res = run_experiment(config);
  REQUIRE(res.records.size() == 1);
  CHECK(res.records[0].epoch == 0);
  CHECK(res.records[0].mean_loss == 0.0);
}

TEST_CASE("checkpoint resume reproduces the uninterrupted trajectory") {
  ExperimentConfig config = base_config();
  config.epochs = 4;
  config.iterations = 3;

  std::ostringstream full;
  RunOptions full_opts;
  full_opts.metrics_out = &full;
  run_experiment(config, full_opts);
  const auto full_lines = lines_of(full.str());
  REQUIRE(full_lines.size() == 4);

  // saving mid-run does not perturb the stream
  TempFile ckpt("harness_ckpt.tmp");
  std::ostringstream saved;
  RunOptions save_opts;
  save_opts.metrics_out = &saved;
  save_opts.save_at_epoch = 2;
  save_opts.save_path = ckpt.path;
  run_experiment(config, save_opts);
  CHECK(saved.str() == full.str());

  // the resumed tail equals the uninterrupted tail, line for line
  std::ostringstream tail;
  RunOptions tail_opts;
  tail_opts.metrics_out = &tail;
  const RunResult resumed = resume_experiment(config, ckpt.path, tail_opts);
  const auto tail_lines = lines_of(tail.str());
  REQUIRE(tail_lines.size() == 2);
  CHECK(resumed.records.front().epoch == 3);
  CHECK(tail_lines[0] == full_lines[2]);
  CHECK(tail_lines[1] == full_lines[3]);

  // a checkpoint taken at the last epoch leaves nothing to do
  TempFile final_ckpt("harness_ckpt_final.tmp");
  RunOptions final_opts;
  final_opts.save_at_epoch = 4;
  final_opts.save_path = final_ckpt.path;
  run_experiment(config, final_opts);
  const RunResult noop = resume_experiment(config, final_ckpt.path);
  CHECK(noop.records.empty());

  // the header exposes the stamp without loading the tensors
  const CheckpointHeader header = read_checkpoint_header(ckpt.path);
  CHECK(header.completed_epochs == 2);
  ExperimentConfig validated = config;
  validate_config(validated);
  CHECK(header.config_hash == config_hash(validated));

  // evaluate without training: the record carries the checkpoint epoch
  const MetricsRecord ev = evaluate_checkpoint(config, ckpt.path);
  CHECK(ev.epoch == 2);
  CHECK(ev.mean_loss == 0.0);
  CHECK(ev.mean_ap >= 0.0);
  CHECK(ev.mean_ap <= 1.0);
}

TEST_CASE("a pre-training checkpoint replays the whole run") {
  ExperimentConfig config = base_config();
  config.iterations = 3;

  std::ostringstream full;
  RunOptions full_opts;
  full_opts.metrics_out = &full;
  run_experiment(config, full_opts);

  TempFile ckpt("harness_ckpt0.tmp");
  RunOptions save_opts;
  save_opts.save_at_epoch = 0;
  save_opts.save_path = ckpt.path;
  run_experiment(config, save_opts);
  CHECK(read_checkpoint_header(ckpt.path).completed_epochs == 0);

  std::ostringstream replay;
  RunOptions replay_opts;
  replay_opts.metrics_out = &replay;
  resume_experiment(config, ckpt.path, replay_opts);
  CHECK(replay.str() == full.str());
}

TEST_CASE("resume rejects mismatched configs") {
  ExperimentConfig config = base_config();
  config.epochs = 2;
  config.iterations = 2;
  TempFile ckpt("harness_ckpt_mismatch.tmp");
  RunOptions opts;
  opts.save_at_epoch = 1;
  opts.save_path = ckpt.path;
  run_experiment(config, opts);

  ExperimentConfig other = config;
  other.seed = 999;
  CHECK_THROWS_WITH_AS(
      resume_experiment(other, ckpt.path),
      "checkpoint was written under a different config (hash mismatch)",
      std::runtime_error);
  CHECK_THROWS_AS(evaluate_checkpoint(other, ckpt.path), std::runtime_error);

  // the epoch counter is part of the hashed config, so a checkpoint can only
  // run ahead of its own config through a doctored file
  Checkpoint doctored = load_checkpoint(ckpt.path);
  doctored.completed_epochs = 7;
  TempFile ahead("harness_ckpt_ahead.tmp");
  save_checkpoint(ahead.path, doctored);
  CHECK_THROWS_WITH_AS(resume_experiment(config, ahead.path),
                       "checkpoint is ahead of the configured epochs",
                       std::runtime_error);
}

TEST_CASE("checkpoint files reject corruption") {
  ExperimentConfig config = base_config();
  config.epochs = 1;
  config.iterations = 2;
  TempFile ckpt("harness_ckpt_corrupt.tmp");
  RunOptions opts;
  opts.save_at_epoch = 1;
  opts.save_path = ckpt.path;
  run_experiment(config, opts);

  std::string bytes;
  {
    std::ifstream in(ckpt.path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    bytes = buf.str();
  }
  REQUIRE(bytes.size() > 64);

  TempFile bad("harness_ckpt_bad.tmp");
  const std::string magic_msg = "not a checkpoint file (bad magic): " + bad.path;
  const std::string trunc_msg = "checkpoint file is truncated: " + bad.path;
  const std::string trail_msg = "checkpoint has trailing bytes: " + bad.path;
  {
    std::string wrong = bytes;
    wrong[0] = 'X';
    std::ofstream out(bad.path, std::ios::binary);
    out << wrong;
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(bad.path), magic_msg.c_str(),
                       std::runtime_error);
  CHECK_THROWS_AS(read_checkpoint_header(bad.path), std::runtime_error);

  {
    std::ofstream out(bad.path, std::ios::binary);
    out << bytes.substr(0, bytes.size() / 2);
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(bad.path), trunc_msg.c_str(),
                       std::runtime_error);

  {
    std::ofstream out(bad.path, std::ios::binary);
    out << bytes << '!';
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(bad.path), trail_msg.c_str(),
                       std::runtime_error);

  CHECK_THROWS_WITH_AS(load_checkpoint("harness_ckpt_missing.tmp"),
                       "cannot open checkpoint file: harness_ckpt_missing.tmp",
                       std::runtime_error);
}

TEST_CASE("save options are validated up front") {
  ExperimentConfig config = base_config();
  RunOptions no_path;
  no_path.save_at_epoch = 1;
  CHECK_THROWS_WITH_AS(run_experiment(config, no_path),
                       "save_at_epoch set without a save path",
                       std::runtime_error);

  RunOptions too_late;
  too_late.save_at_epoch = 5;  // config has 3 epochs
  too_late.save_path = "harness_never_written.tmp";
  CHECK_THROWS_AS(run_experiment(config, too_late), std::runtime_error);
}

TEST_CASE("export and import feed the same training run") {
  TempFile dump("harness_dump.tmp");
  ExperimentConfig gen = base_config();
  gen.epochs = 2;
  gen.iterations = 2;
  gen.export_path = dump.path;
  std::ostringstream a;
  RunOptions opts_a;
  opts_a.metrics_out = &a;
  run_experiment(gen, opts_a);

  ExperimentConfig imp = base_config();
  imp.epochs = 2;
  imp.iterations = 2;
  imp.import_path = dump.path;
  std::ostringstream b;
  RunOptions opts_b;
  opts_b.metrics_out = &b;
  run_experiment(imp, opts_b);
  CHECK(a.str() == b.str());

  // dimension disagreement is caught before training
  ExperimentConfig wrong = imp;
  wrong.input_dim = 6;
  CHECK_THROWS_AS(run_experiment(wrong), std::runtime_error);
}

TEST_CASE("degenerate clustering aborts with a diagnostic") {
  // min_pts beyond every neighborhood size marks all samples noise
  ExperimentConfig all_noise = base_config();
  all_noise.dbscan_min_pts = 100;
  CHECK_THROWS_AS(run_experiment(all_noise), DegenerateInput);

  // one giant cluster cannot feed p = 2 distinct classes per batch
  ExperimentConfig one_blob = base_config();
  one_blob.dbscan_eps = 10.0;
  CHECK_THROWS_AS(run_experiment(one_blob), std::runtime_error);
}

TEST_CASE("query split obeys the per-identity quotas") {
  //                     id 7 has five samples, id 3 two, id 9 one
  const std::vector<int> ids{7, 7, 7, 7, 7, 3, 3, 9};
  const auto flags = query_split(ids, 0.3, 1);
  REQUIRE(flags.size() == ids.size());
  std::map<int, int> queries;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    queries[ids[i]] += flags[i] ? 1 : 0;
  }
  CHECK(queries[7] == 1);  // floor(1.5) = 1
  CHECK(queries[3] == 1);  // floor(0.6) = 0, raised to the minimum of one
  CHECK(queries[9] == 0);  // lone samples stay in the gallery

  const auto big = query_split(ids, 0.9, 1);
  std::map<int, int> big_queries;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    big_queries[ids[i]] += big[i] ? 1 : 0;
  }
  CHECK(big_queries[7] == 4);  // floor(4.5) = 4 and one must stay behind
  CHECK(big_queries[3] == 1);
  CHECK(big_queries[9] == 0);

  // deterministic per seed, different across seeds
  CHECK(query_split(ids, 0.3, 1) == flags);
  const std::vector<int> many(20, 4);
  CHECK(query_split(many, 0.5, 1) != query_split(many, 0.5, 2));

  CHECK_THROWS_AS(query_split(ids, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(query_split(ids, 1.0, 1), std::invalid_argument);
}

TEST_CASE("sweep emits one CSV row per value") {
  ExperimentConfig base = base_config();
  base.epochs = 2;
  base.iterations = 2;

  const std::string csv = sweep(base, "k", {1.0, 2.0});
  const auto lines = lines_of(csv);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] ==
        "param,value,epoch,mean_loss,map,cmc1,cmc5,cmc10,purity,"
        "n_target_classes,domain_distance");
  CHECK(lines[1].rfind("k,1,2,", 0) == 0);
  CHECK(lines[2].rfind("k,2,2,", 0) == 0);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    CHECK(columns_of(lines[i]) == 11);
  }

  // deterministic end to end
  CHECK(sweep(base, "k", {1.0, 2.0}) == csv);

  const std::string alpha_csv = sweep(base, "alpha", {0.0, 0.25});
  const auto alpha_lines = lines_of(alpha_csv);
  REQUIRE(alpha_lines.size() == 3);
  CHECK(alpha_lines[1].rfind("alpha,0,", 0) == 0);
  CHECK(alpha_lines[2].rfind("alpha,0.25,", 0) == 0);

  CHECK_THROWS_AS(sweep(base, "tau", {0.1}), std::invalid_argument);
  CHECK_THROWS_AS(sweep(base, "k", {}), std::invalid_argument);
}

TEST_CASE("ablation presets produce per-seed rows plus medians") {
  ExperimentConfig base = base_config();
  base.epochs = 2;
  base.iterations = 2;

  const std::string csv = ablate(base, "dscl", 2);
  const auto lines = lines_of(csv);
  // header + per arm: two seed rows and a median row
  REQUIRE(lines.size() == 7);
  CHECK(lines[0] ==
        "preset,arm,seed,epoch,mean_loss,map,cmc1,cmc5,cmc10,purity,"
        "n_target_classes,domain_distance");
  CHECK(lines[1].rfind("dscl,ucl,11,", 0) == 0);
  CHECK(lines[2].rfind("dscl,ucl,12,", 0) == 0);
  CHECK(lines[3].rfind("dscl,ucl,median,", 0) == 0);
  CHECK(lines[4].rfind("dscl,dscl,11,", 0) == 0);
  CHECK(lines[5].rfind("dscl,dscl,12,", 0) == 0);
  CHECK(lines[6].rfind("dscl,dscl,median,", 0) == 0);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    CHECK(columns_of(lines[i]) == 12);
  }

  // every preset names its arms in a fixed order
  const std::string t1 = ablate(base, "table1", 1);
  const auto t1_lines = lines_of(t1);
  REQUIRE(t1_lines.size() == 5);
  CHECK(t1_lines[1].rfind("table1,multi,", 0) == 0);
  CHECK(t1_lines[3].rfind("table1,uni,", 0) == 0);

  const std::string t2 = ablate(base, "table2", 1);
  const auto t2_lines = lines_of(t2);
  REQUIRE(t2_lines.size() == 9);
  CHECK(t2_lines[1].rfind("table2,least_mean,", 0) == 0);
  CHECK(t2_lines[3].rfind("table2,moderate_mean,", 0) == 0);
  CHECK(t2_lines[5].rfind("table2,most_mean,", 0) == 0);
  CHECK(t2_lines[7].rfind("table2,moderate_all,", 0) == 0);

  const std::string t3 = ablate(base, "table3", 1);
  const auto t3_lines = lines_of(t3);
  REQUIRE(t3_lines.size() == 9);
  CHECK(t3_lines[1].rfind("table3,none,", 0) == 0);
  CHECK(t3_lines[3].rfind("table3,soni,", 0) == 0);
  CHECK(t3_lines[5].rfind("table3,qnni,", 0) == 0);
  CHECK(t3_lines[7].rfind("table3,rnni,", 0) == 0);

  CHECK_THROWS_AS(ablate(base, "table9", 1), std::invalid_argument);
  CHECK_THROWS_AS(ablate(base, "dscl", 0), std::invalid_argument);
}
