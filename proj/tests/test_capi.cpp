// Copyright 2026 The PlaNet-VMC Authors - All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <planet_vmc.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

namespace fs = std::filesystem;

namespace {

const char* kTiny = R"({
  "system": {"name": "H2"},
  "wavefunction": {"single_width": 8, "pair_width": 4, "n_layers": 2, "n_determinants": 2,
                   "n_jastrow_layers": 2, "nuclei_embed_dim": 4},
  "metagnn": {"enabled": false},
  "surrogate": {"enabled": true, "n_blocks": 1, "interaction_dim": 8, "out_dim": 8,
                "basis_embed": 4, "out_layers": 1},
  "optim": {"iterations": 2, "batch_size": 16, "n_geometries": 2, "cg_steps": 10},
  "mcmc": {"steps": 2, "burn_in": 5},
  "pretrain": {"iterations": 2},
  "evaluation": {"n_samples": 32, "n_walkers": 16, "burn_in": 5, "steps_between": 2},
  "run": {"seed": 5, "threads": 1, "log_every": 1000}
})";

std::string take(char* s) {
  std::string out = s;
  planet_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("config handles") {
  planet_config* c = nullptr;
  REQUIRE(planet_config_default(&c) == PLANET_OK);
  char* s = nullptr;
  REQUIRE(planet_config_get(c, "system.name", &s) == PLANET_OK);
  CHECK(take(s) == "H2");
  CHECK(planet_config_set(c, "optim.lr=0.25") == PLANET_OK);
  REQUIRE(planet_config_get(c, "optim.lr", &s) == PLANET_OK);
  CHECK(std::stod(take(s)) == 0.25);
  CHECK(planet_config_set(c, "optim.bogus=1") == PLANET_ERR_CONFIG);
  CHECK(std::string(planet_last_error()).find("bogus") != std::string::npos);
  CHECK(planet_config_get(c, "nope", &s) != PLANET_OK);
  REQUIRE(planet_config_to_json(c, &s) == PLANET_OK);
  const std::string json = take(s);
  planet_config* d = nullptr;
  REQUIRE(planet_config_parse(json.c_str(), &d) == PLANET_OK);
  CHECK(planet_config_validate(d) == PLANET_OK);
  planet_config_free(d);
  planet_config_free(c);

  CHECK(planet_config_parse("{", &d) == PLANET_ERR_CONFIG);
  CHECK(planet_config_load("/nonexistent/config.json", &d) != PLANET_OK);
  CHECK(planet_config_default(nullptr) == PLANET_ERR_INVALID_ARGUMENT);
  CHECK(planet_checkpoint_version() >= 1);
  CHECK(std::string(planet_version()).size() > 0);
}

TEST_CASE("relative mae") {
  const double a[] = {-1.0, -2.0, -3.0};
  const double b[] = {-0.5, -1.5, -2.5};
  double out = -1.0;
  REQUIRE(planet_relative_mae(a, b, 3, &out) == PLANET_OK);
  CHECK(out == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(planet_relative_mae(a, b, 0, &out) != PLANET_OK);
}

TEST_CASE("train and query through the C interface") {
  const fs::path dir = fs::temp_directory_path() / "planet_capi";
  fs::remove_all(dir);
  planet_config* c = nullptr;
  REQUIRE(planet_config_parse(kTiny, &c) == PLANET_OK);
  const std::string set = "run.output_dir=" + dir.string();
  REQUIRE(planet_config_set(c, set.c_str()) == PLANET_OK);
  REQUIRE(planet_train(c, nullptr) == PLANET_OK);
  planet_config_free(c);
  const std::string ck = (dir / "checkpoint.cbor").string();

  planet_model* m = nullptr;
  REQUIRE(planet_model_open(ck.c_str(), &m) == PLANET_OK);
  size_t dim = 0;
  CHECK(planet_model_dim(m, &dim) == PLANET_OK);
  CHECK(dim == 1);
  const double r = 1.4;
  double e = 0.0, se = 0.0;
  CHECK(planet_model_surrogate_energy(m, &r, 1, &e) == PLANET_OK);
  CHECK(std::isfinite(e));
  CHECK(planet_model_surrogate_energy(m, &r, 2, &e) == PLANET_ERR_INVALID_ARGUMENT);
  CHECK(planet_model_vmc_energy(m, &r, 1, 32, 1, &e, &se) == PLANET_OK);
  CHECK(std::isfinite(e));
  planet_model_free(m);

  size_t n = 0;
  double spp = 0.0;
  const std::string out = (dir / "sur.csv").string();
  CHECK(planet_eval_surrogate(ck.c_str(), nullptr, out.c_str(), &n, &spp) == PLANET_OK);
  CHECK(n == 16);
  CHECK(planet_model_open("/nonexistent.cbor", &m) == PLANET_ERR_IO);
}
