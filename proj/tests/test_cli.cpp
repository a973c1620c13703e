#include <doctest.h>

#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "brw/cli.hpp"

using namespace brw;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "brwlab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

}  // namespace

TEST_CASE("check prints the boundary report") {
  const auto r = run({"check", "--law", "ssrw-coupled", "--no-timestamp"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.rfind("# {", 0) == 0);
  CHECK(r.out.find("\nsigma2,1\n") != std::string::npos);
  CHECK(r.out.find("\nboundary,1\n") != std::string::npos);
  CHECK(r.out.find("timestamp") == std::string::npos);
  CHECK(run({"check", "--law", "ssrw-coupled"}).out.find("timestamp") != std::string::npos);
}

TEST_CASE("usage and missing files exit 2") {
  const auto missing = run({"simulate", "--law", "missing.json"});
  CHECK(missing.code == kExitUsage);
  CHECK(missing.err.find("missing.json") != std::string::npos);
  CHECK(run({"simulate", "--law", "ssrw-coupled", "--bogus"}).code == kExitUsage);
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"spine", "--functional", "two"}).code == kExitUsage);
  CHECK(run({"check", "--seed", "-4"}).code == kExitUsage);
  CHECK(run({"experiment", "--name", "min-fluct", "--f", "system(1)"}).code == kExitUsage);
}

TEST_CASE("oracle battery passes and budget refusals exit 3") {
  const auto r = run({"oracle", "--law", "ssrw-coupled", "--n", "3", "--battery", "default", "--no-timestamp"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(r.out.find("martingale-gap:D_alpha,3,") != std::string::npos);
  // martingale gap at n = 6 needs depth-5 trees: far beyond 1e7
  CHECK(run({"oracle", "--law", "ssrw-coupled", "--n", "6"}).code == kExitBudget);
  // a zero tolerance fails on round-off somewhere in the battery
  CHECK(run({"oracle", "--law", "ssrw-coupled", "--n", "3", "--tol", "0"}).code == kExitTolerance);
}

TEST_CASE("seed flag, environment fallback and default") {
  const std::vector<std::string> base = {"simulate", "--law", "ssrw-coupled", "--n", "4", "--replicas", "5", "--no-timestamp"};
  auto with = [&](std::vector<std::string> extra) {
    auto a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return run(a);
  };
  ::unsetenv("BRWLAB_SEED");
  const auto d = with({});
  const auto one = with({"--seed", "1"});
  CHECK(d.out == one.out);
  ::setenv("BRWLAB_SEED", "99", 1);
  const auto env = with({});
  const auto flag = with({"--seed", "99"});
  ::unsetenv("BRWLAB_SEED");
  CHECK(env.out == flag.out);
  CHECK(env.out != d.out);
  CHECK(env.out.find("\"seed\":99") != std::string::npos);
}

TEST_CASE("outputs are byte-identical across thread counts") {
  const std::vector<std::vector<std::string>> cmds = {
      {"simulate", "--law", "ssrw-coupled", "--n", "8", "--replicas", "40"},
      {"spine", "--law", "ssrw-coupled", "--n", "8", "--replicas", "200", "--functional", "w-ratio"},
      {"experiment", "--name", "min-fluct", "--n", "8,16", "--replicas", "300"},
  };
  for (auto c : cmds) {
    c.push_back("--no-timestamp");
    auto a = c, b = c;
    a.insert(a.end(), {"--threads", "1"});
    b.insert(b.end(), {"--threads", "4"});
    const auto ra = run(a), rb = run(b);
    CAPTURE(c.front());
    CHECK(ra.code == rb.code);
    CHECK(ra.out == rb.out);
    CHECK(ra.out.find("threads") == std::string::npos);
  }
}

TEST_CASE("walk subcommands") {
  const auto r = run({"walk", "renewal", "--law", "ssrw-coupled", "--grid", "0:3:1", "--no-timestamp"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("x,R,stderr\n0,1,0\n1,2,0\n2,3,0\n3,4,0\n") != std::string::npos);
  const auto e = run({"walk", "estimates", "--spec", "K1", "--n", "100,1000", "--no-timestamp"});
  CHECK(e.code == kExitOk);
  CHECK(e.out.find("x,n,lhs,rhs,ratio\n0,100,") != std::string::npos);
  CHECK(run({"walk", "estimates", "--spec", "Q7"}).code == kExitUsage);
  CHECK(run({"walk", "renewal", "--grid", "3:1:1"}).code == kExitUsage);
}
