#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "commtype/wellformedness.hpp"
#include "support/generators.hpp"

using namespace commtype;

namespace {

std::string read_data(const std::string& name) {
  std::ifstream in(std::string(COMMTYPE_DATA_DIR) + "/" + name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> codes(const WfReport& r) {
  std::vector<std::string> out;
  for (const auto& d : r.diagnostics) out.push_back(d.code);
  return out;
}

WfReport check(std::string_view text, Env values = {}) {
  return check_wf(parse_protocol(text), {std::move(values)});
}

}  // namespace

TEST_CASE("finite differences instantiations") {
  Protocol p = parse_protocol(read_data("fdiff.cty"));
  for (std::int64_t size : {0, 3, 9, 300}) CHECK(check_wf(p, {{{"size", size}}}).ok());

  WfReport bad = check_wf(p, {{{"size", 7}}});
  REQUIRE(bad.diagnostics.size() == 1);
  CHECK(bad.diagnostics[0].code == "refinement-violated");
  CHECK(bad.diagnostics[0].message.rfind("refinement violated at binder size", 0) == 0);
  CHECK(bad.diagnostics[0].loc == SourceLoc{2, 1});

  CHECK(codes(check_wf(p, {{{"size", -3}}})) == std::vector<std::string>{"refinement-violated"});
  CHECK(codes(check_wf(p, {})) == std::vector<std::string>{"missing-binding"});
  CHECK(codes(check_wf(p, {{{"size", 9}, {"extra", 1}}})) ==
        std::vector<std::string>{"extra-binding"});
}

TEST_CASE("self messages") {
  WfReport r = check("nprocs 2.\nmessage(0,0,MPI_FLOAT,1).\nend");
  REQUIRE(codes(r) == std::vector<std::string>{"self-message"});
  CHECK(r.diagnostics[0].loc == SourceLoc{2, 1});
  CHECK(r.diagnostics[0].path == "body[0]");
  CHECK(codes(check("Pi k: nat. nprocs 3. message(k%3,(k+3)%3,MPI_INT,1).end", {{"k", 4}})) ==
        std::vector<std::string>{"self-message"});
}

TEST_CASE("process count bounds") {
  CHECK(codes(check("nprocs 1. end")) == std::vector<std::string>{"nprocs-range"});
  CHECK(check("nprocs 2. end").ok());
  CHECK(check("nprocs 32767. end").ok());
  CHECK(codes(check("nprocs 32768. end")) == std::vector<std::string>{"nprocs-range"});
}

TEST_CASE("ranks in range") {
  CHECK(codes(check("nprocs 3. message(0,3,MPI_INT,1).end")) ==
        std::vector<std::string>{"rank-range"});
  CHECK(codes(check("nprocs 3. scatter(-1,MPI_INT,1).end")) ==
        std::vector<std::string>{"rank-range"});
  CHECK(codes(check("Pi k: int. nprocs 3. loop(gather(k,MPI_INT,1).end).end", {{"k", 5}})) == std::vector<std::string>{"rank-range"});
  WfReport nested = check("nprocs 3. loop(choice(end, bcast(7,MPI_INT,1).end).end).end");
  REQUIRE(nested.diagnostics.size() == 1);
  CHECK(nested.diagnostics[0].path == "body[0].loop[0].false[0]");
}

TEST_CASE("lengths") {
  CHECK(check("nprocs 2. allreduce(MPI_INT,0,MPI_SUM).end").ok());
  CHECK(codes(check("nprocs 2. allreduce(MPI_INT,0-1,MPI_SUM).end")) ==
        std::vector<std::string>{"negative-length"});
  CHECK(codes(check("Pi k: int. nprocs 2. message(0,1,MPI_INT,1/k).end", {{"k", 0}})) ==
        std::vector<std::string>{"eval-error"});
}

TEST_CASE("protocol expressions see only binders") {
  CHECK(codes(check("nprocs 2. message(me,1,MPI_INT,1).end")) ==
        std::vector<std::string>{"reserved-name"});
  CHECK(codes(check("nprocs 2. message(0,1,MPI_INT,np).end")) ==
        std::vector<std::string>{"reserved-name"});
  CHECK(codes(check("Pi me: nat. nprocs 2. end", {{"me", 0}})) ==
        std::vector<std::string>{"reserved-name"});
}

TEST_CASE("binders") {
  CHECK(codes(check("Pi k: nat. Pi k: nat. nprocs 2. end", {{"k", 1}})) ==
        std::vector<std::string>{"duplicate-binder"});
  CHECK(codes(check("Pi k: float. nprocs 2. end", {{"k", 1}})) ==
        std::vector<std::string>{"binder-kind"});
  CHECK(check("Pi a: nat. Pi b: {v:int|v>a}. nprocs 2. end", {{"a", 1}, {"b", 2}}).ok());
  CHECK(codes(check("Pi a: nat. Pi b: {v:int|v>a}. nprocs 2. end", {{"a", 2}, {"b", 2}})) ==
        std::vector<std::string>{"refinement-violated"});
  // A refinement naming a later binder cannot be evaluated.
  CHECK(codes(check("Pi b: {v:int|v>a}. Pi a: nat. nprocs 2. end", {{"a", 1}, {"b", 2}})) ==
        std::vector<std::string>{"eval-error"});
}

TEST_CASE("generated protocols are well-formed") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    auto g = testing::random_protocol(rng);
    WfReport r = check_wf(g.protocol, g.inst);
    CHECK_MESSAGE(r.ok(), print_protocol(g.protocol));
  }
}

TEST_CASE("check_wf is deterministic") {
  Protocol p = parse_protocol("nprocs 2. message(0,0,MPI_INT,0-1).scatter(5,MPI_INT,1).end");
  WfReport a = check_wf(p, {});
  WfReport b = check_wf(p, {});
  CHECK(a.diagnostics == b.diagnostics);
  CHECK(a.diagnostics.size() == 3);
}
