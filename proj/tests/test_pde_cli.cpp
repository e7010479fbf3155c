#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "clairaut/cli.hpp"
#include "fixtures.hpp"

using namespace clairaut;
using fixtures::uniform;
using nlohmann::ordered_json;

// ---- Clairaut PDE ---------------------------------------------------------------

namespace {

const char* kLinearTail = "z1^2 + z2^2 + z3";
const char* kConvex = "exp(z1) + z2^2/2 + z1*z2/4";

// Envelope of the general family: stationary point of c -> y_gen(c)(x),
// located by Newton with finite-difference derivatives in c.
double envelope_of_general(const ClairautProblem& prob, const std::vector<double>& x) {
  std::size_t n = prob.n();
  auto g = [&](const std::vector<double>& c) { return general_solution(prob, c)(x); };
  std::vector<double> c(n, 0.0);
  const double h = 1e-4;
  for (int it = 0; it < 50; ++it) {
    Vector grad(n);
    Matrix hess(n, n);
    for (std::size_t a = 0; a < n; ++a) {
      auto up = c, dn = c;
      up[a] += h;
      dn[a] -= h;
      grad(a) = (g(up) - g(dn)) / (2 * h);
      for (std::size_t b = 0; b < n; ++b) {
        auto pp = c, pm = c, mp = c, mm = c;
        pp[a] += h, pp[b] += h;
        pm[a] += h, pm[b] -= h;
        mp[a] -= h, mp[b] += h;
        mm[a] -= h, mm[b] -= h;
        hess(a, b) = (g(pp) - g(pm) - g(mp) + g(mm)) / (4 * h * h);
      }
    }
    Vector step = hess.fullPivLu().solve(grad);
    for (std::size_t a = 0; a < n; ++a) c[a] -= step(a);
    if (step.norm() < 1e-13) break;
  }
  return g(c);
}

}  // namespace

TEST(ClairautPde, GeneralSolutionExample) {
  auto prob = ClairautProblem::parse(kLinearTail);
  ASSERT_EQ(prob.n(), 3u);
  std::mt19937_64 rng(1);
  for (int k = 0; k < 20; ++k) {
    std::vector<double> c{uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2)};
    std::vector<double> x{uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2)};
    double expect = c[0] * (x[0] - c[0]) + c[1] * (x[1] - c[1]) + c[2] * (x[2] - 1);
    EXPECT_NEAR(general_solution(prob, c)(x), expect, 1e-12);
  }
  auto zero = ClairautProblem::parse("0", 2);
  EXPECT_EQ(general_solution(zero, {0, 0})({3, -4}), 0.0);
  EXPECT_THROW(general_solution(prob, {1, 2}), Error);
}

TEST(ClairautPde, OscillatorGeneralForm) {
  // y = pbar*c - (m c^2/2 - k x^2/2) with z1 = c, x1 = pbar
  double m = 2, k = 3, x = 0.7;
  auto prob = ClairautProblem::parse("2*z1^2/2 - 3*0.7^2/2");
  for (double c : {-1.0, 0.5, 2.0})
    for (double pbar : {-0.3, 1.1}) EXPECT_NEAR(general_solution(prob, {c})({pbar}), pbar * c - m * c * c / 2 + k * x * x / 2, 1e-12);
}

TEST(ClairautPde, EnvelopeExamples) {
  auto quad = ClairautProblem::parse("z1^2/2");
  EXPECT_NEAR(envelope_solution(quad, {3.0}), 4.5, 1e-12);
  auto two = ClairautProblem::parse("z1^2 + z2^2");
  std::mt19937_64 rng(2);
  for (int k = 0; k < 20; ++k) {
    std::vector<double> x{uniform(rng, -3, 3), uniform(rng, -3, 3)};
    EXPECT_NEAR(envelope_solution(two, x), x[0] * x[0] / 4 + x[1] * x[1] / 4, 1e-10);
  }
  auto deficient = ClairautProblem::parse(kLinearTail);
  try {
    envelope_solution(deficient, {1, 1, 1});
    FAIL();
  } catch (const RankError& e) {
    EXPECT_NE(std::string(e.what()).find("rank 2"), std::string::npos) << e.what();
  }
}

TEST(ClairautPde, MixedExamples) {
  auto prob = ClairautProblem::parse(kLinearTail);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 20; ++k) {
    std::vector<double> x{uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2)};
    double c2 = uniform(rng, -2, 2), c3 = uniform(rng, -2, 2);
    EXPECT_NEAR(mixed_solution(prob, 2, {c3}, x), x[0] * x[0] / 4 + x[1] * x[1] / 4 + c3 * (x[2] - 1), 1e-10);
    EXPECT_NEAR(mixed_solution(prob, 1, {c2, c3}, x), x[0] * x[0] / 4 + c2 * (x[1] - c2) + c3 * (x[2] - 1), 1e-10);
    std::vector<double> c{uniform(rng, -2, 2), c2, c3};
    EXPECT_NEAR(mixed_solution(prob, 0, c, x), general_solution(prob, c)(x), 1e-12);
  }
  EXPECT_NEAR(mixed_solution(prob, 2, {1.0}, {2, 2, 3}), 4.0, 1e-10);
  EXPECT_THROW(mixed_solution(prob, 3, {}, {1, 1, 1}), RankError);
  EXPECT_THROW(mixed_solution(prob, 4, {}, {1, 1, 1}), RankError);
  EXPECT_THROW(mixed_solution(prob, 1, {1.0}, {1, 1, 1}), Error);
}

TEST(ClairautPde, ResidualsVanishOnAllFamilies) {
  auto lin = ClairautProblem::parse(kLinearTail);
  auto cvx = ClairautProblem::parse(kConvex);
  std::mt19937_64 rng(4);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> x3{uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2)};
    std::vector<double> c3{uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2)};
    EXPECT_LE(clairaut_pde_residual(lin, general_solution(lin, c3), x3), 1e-8);
    Solution mix2 = [&](const std::vector<double>& p) { return mixed_solution(lin, 2, {c3[2]}, p); };
    EXPECT_LE(clairaut_pde_residual(lin, mix2, x3), 1e-8);
    Solution mix1 = [&](const std::vector<double>& p) { return mixed_solution(lin, 1, {c3[1], c3[2]}, p); };
    EXPECT_LE(clairaut_pde_residual(lin, mix1, x3), 1e-8);
    std::vector<double> x2{uniform(rng, 1, 3), uniform(rng, -1, 1)};
    Solution env = [&](const std::vector<double>& p) { return envelope_solution(cvx, p); };
    EXPECT_LE(clairaut_pde_residual(cvx, env, x2), 1e-8);
  }
}

TEST(ClairautPde, EnvelopeAgreesWithEnvelopeOfGeneral) {
  auto cvx = ClairautProblem::parse(kConvex);
  auto two = ClairautProblem::parse("z1^2 + z2^2");
  std::mt19937_64 rng(5);
  for (int k = 0; k < 30; ++k) {
    std::vector<double> x{uniform(rng, 1, 3), uniform(rng, -1, 1)};
    EXPECT_NEAR(envelope_solution(cvx, x), envelope_of_general(cvx, x), 1e-8);
    EXPECT_NEAR(envelope_solution(two, x), envelope_of_general(two, x), 1e-8);
  }
}

TEST(ClairautPde, ParseRejectsForeignSymbols) {
  EXPECT_THROW(ClairautProblem::parse("z1 + x"), ModelError);
  EXPECT_THROW(ClairautProblem::parse("z0^2"), ModelError);
  EXPECT_THROW(ClairautProblem(0, parse_expression("1")), ModelError);
  EXPECT_EQ(ClairautProblem::parse("z4").n(), 4u);
}

// ---- command line ------------------------------------------------------------------

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "clairaut");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream os, es;
  Run r;
  r.code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), os, es);
  r.out = os.str();
  r.err = es.str();
  return r;
}

std::string model(const std::string& name) { return fixtures::model_path(name); }

std::vector<std::vector<std::string>> csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST(Cli, AnalyzeFixtures) {
  auto r = run({"analyze", model("cawley")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = ordered_json::parse(r.out);
  EXPECT_EQ(j["hessian_rank"], 2);
  EXPECT_EQ(j["degenerate"], ordered_json::array({"z"}));
  EXPECT_EQ(j["classification"]["kind"], "limit");
  EXPECT_EQ(j["classification"]["rank_F"], 0);
  auto o = ordered_json::parse(run({"analyze", model("oscillator")}).out);
  EXPECT_EQ(o["hessian_rank"], 1);
  EXPECT_TRUE(o["degenerate"].empty());
}

TEST(Cli, ExitCodes) {
  auto missing = run({"analyze", "missing.lag"});
  EXPECT_EQ(missing.code, 2);
  EXPECT_FALSE(missing.err.empty());
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"transform", model("exponential"), "--at", "x=1,p_x=-1"}).code, 3);
  EXPECT_EQ(run({"simulate", model("oscillator"), "--init", "x=1,p_x=0", "--dt", "0"}).code, 2);
  EXPECT_EQ(run({"simulate", model("oscillator"), "--init", "x=1,p_x=0", "--dt", "-1"}).code, 2);
  EXPECT_EQ(run({"simulate", model("oscillator"), "--init", "x=1"}).code, 2);
  EXPECT_EQ(run({"pde", "--f", "z1^2", "--mode", "sideways", "--at", "x1=1"}).code, 2);
  EXPECT_EQ(run({"pde", "--f", "z1^2 +", "--at", "x1=1"}).code, 2);
}

TEST(Cli, TransformParticleAndCawley) {
  auto r = run({"transform", model("particle"), "--at", "x0=0,x=0,y=0,z=0,p_x=3,p_y=0,p_z=4"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = ordered_json::parse(r.out);
  EXPECT_NEAR(j["B"]["x0"].get<double>(), -std::sqrt(50.0), 1e-9);
  EXPECT_NEAR(j["H_phys"].get<double>(), 0.0, 1e-9);
  auto c = ordered_json::parse(run({"transform", model("cawley"), "--at", "x=1,y=0,z=2,p_x=0.5,p_y=-1"}).out);
  EXPECT_EQ(c["DH"]["z"].get<double>(), 0.0);
  auto bad = run({"transform", model("cawley"), "--at", "x=1,y=0,z=2,p_x=0.5,p_y=-1,w=3"});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("'w'"), std::string::npos) << bad.err;
  auto partial = run({"transform", model("cawley"), "--at", "x=1,y=0,p_x=0.5,p_y=-1"});
  EXPECT_EQ(partial.code, 2);
  EXPECT_NE(partial.err.find("z"), std::string::npos) << partial.err;
}

TEST(Cli, SimulateOscillatorCsv) {
  auto r = run({"simulate", model("oscillator"), "--init", "x=1,p_x=0"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = csv(r.out);
  ASSERT_EQ(rows.size(), 1002u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"t", "q:x", "p:x", "H_phys", "consistency_residual", "el_residual"}));
  for (const auto& row : rows) EXPECT_EQ(row.size(), rows[0].size());
  EXPECT_NEAR(std::stod(rows.back()[0]), 1.0, 1e-12);
  EXPECT_NEAR(std::stod(rows.back()[1]), std::cos(1.0), 1e-6);
  EXPECT_NE(r.err.find("max_el_residual"), std::string::npos);
}

TEST(Cli, SimulateParticleMomentaConstant) {
  auto r = run({"simulate", model("particle"), "--init", "x0=0,x=0,y=0,z=0,p_x=3,p_y=0,p_z=4", "--gauge", "x0=1",
                "--t1", "10", "--dt", "1e-3"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = csv(r.out);
  ASSERT_EQ(rows.size(), 10002u);
  std::vector<std::size_t> pcols;
  for (std::size_t k = 0; k < rows[0].size(); ++k)
    if (rows[0][k].rfind("p:", 0) == 0) pcols.push_back(k);
  ASSERT_EQ(pcols.size(), 3u);
  for (std::size_t i = 1; i < rows.size(); ++i)
    for (auto k : pcols) EXPECT_NEAR(std::stod(rows[i][k]), std::stod(rows[1][k]), 1e-7);
  EXPECT_EQ(run({"simulate", model("particle"), "--init", "x0=0,x=0,y=0,z=0,p_x=3,p_y=0,p_z=4", "--gauge", "x0=x"})
                .code,
            2);
}

TEST(Cli, VerifyIsDeterministic) {
  auto a = run({"verify", model("cawley"), "--seed", "7"});
  auto b = run({"verify", model("cawley"), "--seed", "7"});
  EXPECT_EQ(a.code, 0) << a.out;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(ordered_json::parse(a.out)["seed"], 7);
}

TEST(Cli, VerifyChristLeePreservesConstraints) {
  auto r = run({"verify", model("christ_lee")});
  ASSERT_EQ(r.code, 0) << r.out;
  auto j = ordered_json::parse(r.out);
  bool found = false;
  for (const auto& c : j["checks"])
    if (c["name"] == "constraint_preservation") {
      found = true;
      EXPECT_TRUE(c["pass"].get<bool>());
    }
  EXPECT_TRUE(found);
  EXPECT_EQ(j["classification"]["kind"], "limit");
}

TEST(Cli, PdeExamples) {
  auto mix = run({"pde", "--f", "z1^2+z2^2+z3", "--mode", "mixed", "--s", "2", "--c", "c3=1", "--at", "x1=2,x2=2,x3=3"});
  ASSERT_EQ(mix.code, 0) << mix.err;
  auto j = ordered_json::parse(mix.out);
  EXPECT_NEAR(j["value"].get<double>(), 4.0, 1e-10);
  EXPECT_LE(j["residual"].get<double>(), 1e-8);
  auto env = run({"pde", "--f", "z1^2+z2^2+z3", "--mode", "envelope", "--at", "x1=2,x2=2,x3=3"});
  EXPECT_EQ(env.code, 3);
  EXPECT_NE(env.err.find("rank"), std::string::npos) << env.err;
  auto sq = ordered_json::parse(run({"pde", "--f", "z1^2", "--mode", "envelope", "--at", "x1=3"}).out);
  EXPECT_NEAR(sq["value"].get<double>(), 2.25, 1e-12);
  auto gen = ordered_json::parse(
      run({"pde", "--f", "z1^2+z2^2+z3", "--mode", "general", "--c", "c1=1,c2=2,c3=3", "--at", "x1=2,x2=2,x3=3"}).out);
  EXPECT_NEAR(gen["value"].get<double>(), 1 * (2 - 1) + 2 * (2 - 2) + 3 * (3 - 1), 1e-12);
  EXPECT_EQ(run({"pde", "--f", "z1^2+z2^2+z3", "--mode", "mixed", "--s", "2", "--at", "x1=2,x2=2,x3=3"}).code, 2);
}
