// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0

// Runs the nestedsurf-cli binary end to end.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "cohort_sim.hpp"
#include "doctest.h"
#include "grid.hpp"
#include "test_support.hpp"
#include "volumetry.hpp"

namespace fs = std::filesystem;
using namespace nestedsurf;

namespace {

constexpr double kPi = std::numbers::pi;

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Run cli(const std::string& args, const fs::path& dir, const std::string& env = "") {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = env + " '" NESTEDSURF_CLI "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

double csv_field(const std::string& csv, const std::string& column) {
  std::istringstream in(csv);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  std::istringstream h(header), r(row);
  std::string name, value;
  while (std::getline(h, name, ',') && std::getline(r, value, ','))
    if (name == column) return std::stod(value);
  FAIL("missing column " << column);
  return 0;
}

const char* const kSpheres = "kind = sphere\nradii = 10 15 20\ndims = 64 64 64\ncenter = 0.3 -0.2 0.1\n";

}  // namespace

TEST_CASE("phantom then pipeline reproduces analytic volumes") {
  const auto dir = testing::scratch_dir("cli_pipeline");
  write_file(dir / "spheres.cfg", kSpheres);
  auto r = cli("phantom --spec " + (dir / "spheres.cfg").string() + " --out-dir " + (dir / "d").string(), dir);
  REQUIRE(r.code == 0);
  REQUIRE(fs::exists(dir / "d" / "nested.manifest"));
  r = cli("pipeline --manifest " + (dir / "d" / "nested.manifest").string() + " --out-dir " + (dir / "d").string() +
              " --subject p01 --visit 2 --interval 1.5 --sex 1 --age 70",
          dir);
  REQUIRE(r.code == 0);
  for (const char* name : {"pia.obj", "arachnoid.obj", "epidural.obj", "volumes.csv"}) CHECK(fs::exists(dir / "d" / name));
  const auto csv = slurp(dir / "d" / "volumes.csv");
  CHECK(csv.rfind(std::string(kVolumeCsvHeader) + "\np01,2,1.5,1,70,", 0) == 0);
  CHECK(csv_field(csv, "sas_cm3") == doctest::Approx(4.0 / 3.0 * kPi * (15 * 15 * 15 - 10 * 10 * 10) / 1000).epsilon(0.01).scale(0));
  CHECK(csv_field(csv, "icv_cm3") == doctest::Approx(4.0 / 3.0 * kPi * 8000 / 1000).epsilon(0.01).scale(0));

  r = cli("pipeline --manifest " + (dir / "d" / "nested.manifest").string() + " --out-dir " + (dir / "a").string() +
              " --icv-surface arachnoid",
          dir);
  REQUIRE(r.code == 0);
  const auto a = slurp(dir / "a" / "volumes.csv");
  CHECK(csv_field(a, "icv_cm3") == csv_field(a, "ara_cm3"));
}

TEST_CASE("nest reports violations before and after") {
  const auto dir = testing::scratch_dir("cli_nest");
  write_file(dir / "spheres.cfg", kSpheres);
  REQUIRE(cli("phantom --spec " + (dir / "spheres.cfg").string() + " --out-dir " + (dir / "d").string(), dir).code == 0);
  const auto r = cli("nest --manifest " + (dir / "d" / "nested.manifest").string() + " --out-dir " +
                         (dir / "n").string() + " --inject 50 --magnitude 2 --seed 4 --report " +
                         (dir / "report.txt").string(),
                     dir);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("before_violations=50\n") != std::string::npos);
  CHECK(r.out.find("after_violations=0\n") != std::string::npos);
  CHECK(slurp(dir / "report.txt") == r.out);
  CHECK(fs::exists(dir / "n" / "nested.manifest"));
}

TEST_CASE("exit codes") {
  const auto dir = testing::scratch_dir("cli_exit");
  write_file(dir / "one.cfg", "kind = sphere\nradii = 10\ndims = 32 32 32\n");
  REQUIRE(cli("phantom --spec " + (dir / "one.cfg").string() + " --out-dir " + dir.string(), dir).code == 0);
  const auto vol = (dir / "phantom.mhd").string();

  auto r = cli("mesh --in " + vol + " --out " + (dir / "m.obj").string() + " --iso 999999", dir);
  CHECK(r.code == 2);
  CHECK(r.err.find("iso outside value range") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "m.obj"));

  r = cli("mesh --in " + vol + " --out " + (dir / "m.ply").string(), dir);
  CHECK(r.code == 0);
  CHECK(r.out.empty());
  CHECK(r.err.find("euler 2") != std::string::npos);

  CHECK(cli("frobnicate", dir).code == 1);
  CHECK(cli("", dir).code == 1);
  CHECK(cli("mesh --in " + vol, dir).code == 1);
  CHECK(cli("mesh --in " + vol + " --out x.obj --bogus", dir).code == 1);
  CHECK(cli("lme --cohort c.csv --out-dir o --criterion bayes", dir).code == 1);
  CHECK(cli("--threads -2 mesh --in " + vol + " --out " + (dir / "t.obj").string(), dir).code == 1);
  CHECK(cli("--help", dir).code == 0);

  r = cli("mesh --in " + (dir / "missing.mhd").string() + " --out " + (dir / "x.obj").string(), dir);
  CHECK(r.code == 2);
  CHECK_FALSE(r.err.empty());
  CHECK(cli("sdf --in " + vol + " --out " + (dir / "s.mhd").string(), dir).code == 2);
  CHECK(cli("sdf --in " + vol + " --out " + (dir / "s.mhd").string() + " --reinit", dir).code == 0);
}

TEST_CASE("separate stages match the single pipeline byte for byte") {
  const auto dir = testing::scratch_dir("cli_compose");
  const int n = 56;
  const double o = -(n - 1) / 2.0;
  const std::array<double, 3> radii{9.5, 14.25, 19};
  const std::array<const char*, 3> names{"pia", "arachnoid", "epidural"};
  std::string manifest;
  for (int l = 0; l < 3; ++l) {
    VoxelGrid mask({n, n, n}, {1, 1, 1}, {o, o, o}, ElementKind::BinaryMask);
    for (int z = 0; z < n; ++z)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          const Vec3 p = mask.world_of_voxel({x, y, z}) - Vec3{0.4, 0, -0.3};
          // The outer layers bulge on one side so they cross the inner ones.
          const double r = radii[static_cast<std::size_t>(l)] - (l > 0 && p.x > 0 ? 0.8 * l * p.x : 0);
          mask.at(x, y, z) = norm(p) <= r ? 1.0f : 0.0f;
        }
    write_volume(mask, dir / (std::string(names[static_cast<std::size_t>(l)]) + "_mask.mhd"));
    manifest += std::string(names[static_cast<std::size_t>(l)]) + " = " + names[static_cast<std::size_t>(l)] + "_mask.mhd\n";
  }
  write_file(dir / "masks.manifest", manifest);
  const std::string visit = " --subject s9 --visit 1 --interval 0.5 --sex 0 --age 66.5";

  REQUIRE(cli("pipeline --manifest " + (dir / "masks.manifest").string() + " --out-dir " + (dir / "one").string() + visit,
              dir)
              .code == 0);

  for (const char* name : names)
    REQUIRE(cli(std::string("sdf --in ") + (dir / (std::string(name) + "_mask.mhd")).string() + " --out " +
                    (dir / (std::string(name) + "_sdf.mhd")).string(),
                dir)
                .code == 0);
  const auto nest = cli("nest --pia " + (dir / "pia_sdf.mhd").string() + " --arachnoid " +
                            (dir / "arachnoid_sdf.mhd").string() + " --epidural " + (dir / "epidural_sdf.mhd").string() +
                            " --out-dir " + (dir / "nested").string(),
                        dir);
  REQUIRE(nest.code == 0);
  CHECK(nest.out.find("before_violations=0\n") == std::string::npos);
  CHECK(nest.out.find("after_violations=0\n") != std::string::npos);
  for (const char* name : names)
    REQUIRE(cli(std::string("mesh --in ") + (dir / "nested" / (std::string(name) + ".mhd")).string() + " --out " +
                    (dir / (std::string(name) + ".obj")).string(),
                dir)
                .code == 0);
  REQUIRE(cli("volume --pia-mesh " + (dir / "pia.obj").string() + " --arachnoid-mesh " + (dir / "arachnoid.obj").string() +
                  " --epidural-mesh " + (dir / "epidural.obj").string() + " --out " + (dir / "separate.csv").string() +
                  visit,
              dir)
              .code == 0);

  const auto piped = slurp(dir / "one" / "volumes.csv");
  CHECK(piped == slurp(dir / "separate.csv"));
  for (const char* name : names)
    CHECK(slurp(dir / "one" / (std::string(name) + ".obj")) == slurp(dir / (std::string(name) + ".obj")));

  const auto r = cli("volume --manifest " + (dir / "nested" / "nested.manifest").string() + visit, dir);
  REQUIRE(r.code == 0);
  CHECK(r.out == piped);
}

TEST_CASE("thread count never changes output bytes") {
  const auto dir = testing::scratch_dir("cli_threads");
  write_file(dir / "spheres.cfg",
             "kind = ellipsoid\ndims = 48 48 48\nsemi_axes_pia = 8 10 7\nsemi_axes_arachnoid = 11 13 10\n"
             "semi_axes_epidural = 15 17 13\nnoise = 0.2\nviolations = 200\nseed = 12\n");
  REQUIRE(cli("phantom --spec " + (dir / "spheres.cfg").string() + " --out-dir " + (dir / "d").string(), dir).code == 0);
  const auto manifest = (dir / "d" / "nested.manifest").string();
  const std::array<std::string, 3> runs{"--threads 1", "--threads 3", ""};
  for (std::size_t i = 0; i < runs.size(); ++i)
    REQUIRE(cli(runs[i] + " pipeline --reinit --manifest " + manifest + " --out-dir " + (dir / std::to_string(i)).string(),
                dir, i == 2 ? "NESTEDSURF_THREADS=2" : "")
                .code == 0);
  for (const char* name : {"pia.obj", "arachnoid.obj", "epidural.obj", "volumes.csv"}) {
    const auto ref = slurp(dir / "0" / name);
    CHECK_FALSE(ref.empty());
    CHECK(slurp(dir / "1" / name) == ref);
    CHECK(slurp(dir / "2" / name) == ref);
  }
}

TEST_CASE("metrics and lme subcommands write their reports") {
  const auto dir = testing::scratch_dir("cli_reports");
  write_file(dir / "one.cfg", "kind = sphere\nradii = 20\ndims = 64 64 64\n");
  REQUIRE(cli("phantom --spec " + (dir / "one.cfg").string() + " --out-dir " + dir.string(), dir).code == 0);
  REQUIRE(cli("mesh --in " + (dir / "phantom.mhd").string() + " --out " + (dir / "s.obj").string(), dir).code == 0);
  write_file(dir / "pts.csv", "id,x,y,z\na,20,0,0\nb,0,0,22\n");
  auto r = cli("metrics --mesh " + (dir / "s.obj").string() + " --points " + (dir / "pts.csv").string() +
                   " --out-dir " + (dir / "m").string(),
               dir);
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("median_cg=", 0) == 0);
  CHECK(r.out.find("sd_mean_mm=") != std::string::npos);
  CHECK(slurp(dir / "m" / "summary.txt") == r.out);
  CHECK(slurp(dir / "m" / "curvature.csv").rfind("vertex,K,K_density,CG\n", 0) == 0);
  CHECK(slurp(dir / "m" / "distance.csv").rfind("id,distance_mm\na,", 0) == 0);

  const auto table = testing::simulate_cohort({}, 3);
  std::string csv = std::string(kVolumeCsvHeader) + "\n";
  for (const auto& row : table.rows) {
    VolumeReport rep;
    rep.icv_cm3 = row.icv;
    rep.sas_cm3 = row.sas;
    csv += volume_csv_row({row.subject_id, row.visit_index, row.interval, row.sex, row.baseline_age}, rep) + "\n";
  }
  write_file(dir / "cohort.csv", csv);
  r = cli("lme --cohort " + (dir / "cohort.csv").string() + " --out-dir " + (dir / "l").string(), dir);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("follow-up interval") != std::string::npos);
  for (const char* name : {"lme_report.txt", "lme_report.csv", "trajectory_icv.csv", "trajectory_sas.csv"})
    CHECK(fs::exists(dir / "l" / name));
  CHECK(slurp(dir / "l" / "lme_report.csv").rfind("panel,effect,beta,se,p,significant\nICV,sex,", 0) == 0);

  write_file(dir / "bad.csv", "subject_id,visit_index\n");
  CHECK(cli("lme --cohort " + (dir / "bad.csv").string() + " --out-dir " + (dir / "l2").string(), dir).code == 2);
}
