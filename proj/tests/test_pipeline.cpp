// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <planet/analysis.hpp>
#include <planet/checkpoint.hpp>
#include <planet/config.hpp>
#include <planet/pipeline.hpp>
#include <planet/trainer.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>

using namespace planet;
namespace fs = std::filesystem;

namespace {

const char* kTiny = R"({
  "system": {"name": "H2"},
  "wavefunction": {"single_width": 8, "pair_width": 4, "n_layers": 2, "n_determinants": 2,
                   "n_jastrow_layers": 2, "nuclei_embed_dim": 4},
  "metagnn": {"enabled": true, "node_dim": 6, "message_dim": 4, "n_message_passes": 1},
  "surrogate": {"enabled": true, "n_blocks": 1, "interaction_dim": 8, "out_dim": 8,
                "basis_embed": 4, "out_layers": 1},
  "optim": {"iterations": 3, "batch_size": 16, "n_geometries": 2, "cg_steps": 10},
  "mcmc": {"steps": 2, "burn_in": 5},
  "pretrain": {"iterations": 3},
  "evaluation": {"n_samples": 64, "n_walkers": 16, "burn_in": 5, "steps_between": 2},
  "run": {"seed": 3, "checkpoint_every": 2, "threads": 1, "log_every": 1000}
})";

RunConfig tiny(const std::string& dir) {
  RunConfig c = parse_config(kTiny);
  c.run.output_dir = (fs::temp_directory_path() / ("planet_unit_" + dir)).string();
  fs::remove_all(c.run.output_dir);
  return c;
}

}  // namespace

TEST_CASE("config round trip and validation") {
  const RunConfig c = parse_config(kTiny);
  CHECK(c.wavefunction.single_width == 8);
  CHECK(c.optim.n_geometries == 2);
  const RunConfig back = parse_config(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK_THROWS_AS(parse_config(R"({"optim": {"iterationz": 3}})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"optim": {"batch_size": 15, "n_geometries": 2}})"), Error);
  CHECK_THROWS_AS(parse_config("{not json"), Error);

  RunConfig o = c;
  apply_override(o, "optim.lr=0.5");
  apply_override(o, "system.name=H4");
  CHECK(o.optim.lr == 0.5);
  CHECK(o.system.name == "H4");
  CHECK_THROWS_AS(apply_override(o, "optim.nope=1"), Error);
  CHECK_THROWS_AS(apply_override(o, "lr=1"), Error);

  const auto keys = config_keys();
  CHECK(std::find(keys.begin(), keys.end(), "surrogate_trainer.zeta") != keys.end());
  CHECK(std::find(keys.begin(), keys.end(), "run.seed") != keys.end());
}

TEST_CASE("published schema lists exactly the accepted keys") {
  const nlohmann::json schema =
      nlohmann::json::parse(read_file(std::string(PLANET_SOURCE_DIR) + "/schema/run_config.schema.json"));
  std::vector<std::string> listed;
  for (const auto& [sec, body] : schema.at("properties").items())
    for (const auto& [key, _] : body.at("properties").items()) listed.push_back(sec + "." + key);
  std::vector<std::string> keys = config_keys();
  std::sort(listed.begin(), listed.end());
  std::sort(keys.begin(), keys.end());
  CHECK(listed == keys);
}

TEST_CASE("mae helpers") {
  CHECK(mae({1, 2, 3}, {1, 2, 4}) == doctest::Approx(1.0 / 3));
  CHECK(relative_mae({-1, -2}, {-1.1, -2}) == doctest::Approx(0.05));
  CHECK_THROWS_AS(mae({1}, {1, 2}), Error);
  CHECK_THROWS_AS(relative_mae({1, 2}, {1}), Error);
}

TEST_CASE("grid minimum search") {
  ScanAxis ax{1.0, 3.0, 0.01};
  const auto pts = ax.points();
  CHECK(pts.size() == 201);
  CHECK(pts[1] - pts[0] == doctest::Approx(0.01));
  const MinimumResult r = find_minimum([](const Vector& x) { return (x[0] - 2.0) * (x[0] - 2.0); }, {ax});
  CHECK(r.argmin[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(r.n_evaluated >= 201);

  const MinimumResult flat = find_minimum([](const Vector&) { return 1.0; }, {ScanAxis{0.0, 1.0, 0.25}});
  CHECK(flat.tied.size() == 5);

  auto batched = [](const std::vector<Vector>& xs) {
    std::vector<double> out;
    for (const Vector& x : xs) out.push_back(std::pow(x[0] - 0.3, 2) + std::pow(x[1] + 0.2, 2));
    return out;
  };
  const MinimumResult b = find_minimum_batched(batched, {ScanAxis{-1, 1, 0.1}, ScanAxis{-1, 1, 0.1}});
  CHECK(b.grid_argmin[0] == doctest::Approx(0.3));
  CHECK(b.grid_argmin[1] == doctest::Approx(-0.2));
}

TEST_CASE("records csv round trip") {
  const Dataset h2 = build_dataset("H2");
  std::vector<EnergyRecord> rs(2);
  rs[0].params = Vector::Constant(1, 1.4);
  rs[0].energy = -1.17;
  rs[0].stderr_naive = 1e-4;
  rs[0].source = "vmc";
  rs[1].params = Vector::Constant(1, 2.0);
  rs[1].energy = -1.13;
  rs[1].source = "surrogate";
  const auto back = parse_records_csv(records_csv(h2.domain, rs));
  REQUIRE(back.size() == 2);
  CHECK(back[0].energy == -1.17);
  CHECK(back[1].params[0] == 2.0);
  CHECK(back[1].source == "surrogate");
}

TEST_CASE("trainer step is finite and deterministic") {
  const RunConfig c = tiny("step");
  const Trainer tr(c);
  auto run = [&] {
    TrainState s = tr.init();
    tr.pretrain(s);
    tr.thermalize(s, 5, tr.stream(kTagBurnIn));
    StepResult r;
    for (int i = 0; i < 2; ++i) r = tr.step(s);
    return std::make_pair(r, tr.flat_params(s));
  };
  const auto [a, pa] = run();
  const auto [b, pb] = run();
  CHECK_FALSE(a.aborted);
  REQUIRE(a.stats.size() == 2);
  for (double e : a.stats.mean) CHECK(std::isfinite(e));
  CHECK(pa == pb);
  CHECK(tr.log_row(a, 1) == tr.log_row(b, 1));
}

TEST_CASE("the surrogate does not influence the wave-function trajectory") {
  RunConfig on = tiny("on");
  RunConfig off = on;
  off.surrogate_enabled = false;
  auto run = [](const RunConfig& c) {
    const Trainer tr(c);
    TrainState s = tr.init();
    tr.thermalize(s, 5, tr.stream(kTagBurnIn));
    for (int i = 0; i < 2; ++i) tr.step(s);
    return tr.flat_params(s);
  };
  CHECK(run(on) == run(off));
}

TEST_CASE("checkpoint round trip and version guard") {
  const RunConfig c = tiny("ckpt");
  const Trainer tr(c);
  TrainState s = tr.init();
  s.t = 7;
  const std::string bytes = encode_checkpoint(tr, s);
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(back.version == kCheckpointVersion);
  CHECK(back.state.t == 7);
  CHECK(back.state.wf.flat() == s.wf.flat());
  CHECK(back.state.gnn.flat() == s.gnn.flat());
  CHECK(config_to_json(back.config) == config_to_json(c));

  nlohmann::json j = nlohmann::json::from_cbor(bytes);
  j["version"] = kCheckpointVersion + 1;
  const std::vector<std::uint8_t> cb = nlohmann::json::to_cbor(j);
  CHECK_THROWS_AS(decode_checkpoint(std::string(cb.begin(), cb.end())), Error);
  CHECK_THROWS_AS(decode_checkpoint("garbage"), Error);
}

TEST_CASE("train, resume and evaluate end to end") {
  RunConfig c = tiny("e2e");
  c.optim.iterations = 2;
  const TrainSummary s = cmd_train(c);
  CHECK(s.final_t == 2);
  const std::string dir = c.run.output_dir;
  const std::string ck = (fs::path(dir) / files::kCheckpoint).string();
  REQUIRE(fs::exists(ck));
  c.optim.iterations = 4;
  const TrainSummary r = cmd_train(c, ck);
  CHECK(r.iterations == 2);
  CHECK(r.final_t == 4);

  const std::string grid = (fs::path(dir) / "grid.csv").string();
  write_file_atomic(grid, "r\n1.2\n1.6\n");
  const auto vmc = cmd_eval_vmc(ck, grid, 32, (fs::path(dir) / files::kEvalVmc).string());
  REQUIRE(vmc.size() == 2);
  CHECK(std::isfinite(vmc[0].energy));
  const SurrogateEval sur = cmd_eval_surrogate(ck, grid, (fs::path(dir) / files::kEvalSurrogate).string());
  REQUIRE(sur.records.size() == 2);
  const ReportSummary rep = cmd_report(dir);
  CHECK(rep.mae_available);
  CHECK(rep.n_matched == 2);
  // recompute from the CSVs on disk
  const auto v = parse_records_csv(read_file((fs::path(dir) / files::kEvalVmc).string()));
  const auto su = parse_records_csv(read_file((fs::path(dir) / files::kEvalSurrogate).string()));
  REQUIRE(v.size() == 2);
  REQUIRE(su.size() == 2);
  const double d0 = su[0].energy - v[0].energy, d1 = su[1].energy - v[1].energy;
  CHECK(rep.mae == (std::abs(d0) + std::abs(d1)) / 2);
  const double mv = (v[0].energy + v[1].energy) / 2, ms = (su[0].energy + su[1].energy) / 2;
  CHECK(rep.relative_mae == doctest::Approx((std::abs((su[0].energy - ms) - (v[0].energy - mv)) +
                                             std::abs((su[1].energy - ms) - (v[1].energy - mv))) / 2)
                                .epsilon(1e-14));

  FindMinOptions fm;
  fm.resolution = 0.05;
  const MinimumResult m = cmd_find_min(ck, fm, (fs::path(dir) / files::kFindMin).string());
  CHECK(m.argmin[0] >= 1.0);
  CHECK(m.argmin[0] <= 2.4);
}
