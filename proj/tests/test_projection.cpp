#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "commtype/projection.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace commtype;
using testing::local_tokens;
using testing::reference_projection;

namespace {

std::string read_data(const std::string& name) {
  std::ifstream in(std::string(COMMTYPE_DATA_DIR) + "/" + name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

using Tokens = std::vector<std::string>;

Tokens collectives(const Tokens& toks) {
  Tokens out;
  for (const auto& t : toks) {
    if (t.rfind("send(", 0) != 0 && t.rfind("receive(", 0) != 0) out.push_back(t);
  }
  return out;
}

// Structure tokens only: loop{, choice{, |, }.
Tokens skeleton(const Tokens& toks) {
  Tokens out;
  for (const auto& t : toks) {
    if (t == "loop{" || t == "choice{" || t == "|" || t == "}") out.push_back(t);
  }
  return out;
}

}  // namespace

TEST_CASE("finite differences at size 9") {
  Protocol p = parse_protocol(read_data("fdiff.cty"));
  Instantiation inst{{{"size", 9}}};

  // Rank 0 is read off the global type by hand: the six messages of the loop
  // restricted to those naming rank 0.
  LocalType expected0 = parse_local_type(
      "scatter(0,MPI_FLOAT,3).loop(send(2,MPI_FLOAT,1).receive(1,MPI_FLOAT,1)."
      "receive(2,MPI_FLOAT,1).send(1,MPI_FLOAT,1).allreduce(MPI_FLOAT,1,MPI_MAX).end)."
      "choice(gather(0,MPI_FLOAT,3).end,end).end");
  CHECK(project(p, inst, 0) == expected0);

  LocalType expected1 = parse_local_type(
      "scatter(0,MPI_FLOAT,3).loop(receive(2,MPI_FLOAT,1).send(0,MPI_FLOAT,1)."
      "send(2,MPI_FLOAT,1).receive(0,MPI_FLOAT,1).allreduce(MPI_FLOAT,1,MPI_MAX).end)."
      "choice(gather(0,MPI_FLOAT,3).end,end).end");
  CHECK(project(p, inst, 1) == expected1);

  LocalType expected2 = parse_local_type(
      "scatter(0,MPI_FLOAT,3).loop(send(1,MPI_FLOAT,1).receive(0,MPI_FLOAT,1)."
      "receive(1,MPI_FLOAT,1).send(0,MPI_FLOAT,1).allreduce(MPI_FLOAT,1,MPI_MAX).end)."
      "choice(gather(0,MPI_FLOAT,3).end,end).end");
  CHECK(project(p, inst, 2) == expected2);
}

TEST_CASE("each rank keeps four of the six messages") {
  Protocol p = parse_protocol(read_data("fdiff.cty"));
  ProjectionResult all = project_all(p, {{{"size", 300}}});
  REQUIRE(all.locals.size() == 3);
  for (const auto& l : all.locals) {
    int p2p = 0;
    for (const auto& t : local_tokens(l)) {
      p2p += t.rfind("send(", 0) == 0 || t.rfind("receive(", 0) == 0;
    }
    CHECK(p2p == 4);
    CHECK(local_tokens(l).front() == "scatter(0,MPI_FLOAT,100)");
  }
}

TEST_CASE("uninvolved ranks elide messages") {
  Protocol p = parse_protocol("nprocs 3. message(0,1,MPI_FLOAT,1).end");
  CHECK(project(p, {}, 2).is_end());
  CHECK(print(project(p, {}, 0)) == "send(1,MPI_FLOAT,1).\nend\n");
  CHECK(print(project(p, {}, 1)) == "receive(0,MPI_FLOAT,1).\nend\n");
}

TEST_CASE("end protocol") {
  ProjectionResult r = project_all(parse_protocol("end"), {});
  REQUIRE(r.locals.size() == 2);
  CHECK(r.locals[0].is_end());
  CHECK(r.locals[1].is_end());
}

TEST_CASE("rank out of range") {
  Protocol p = parse_protocol("nprocs 2. end");
  CHECK_THROWS_AS(project(p, {}, 2), std::out_of_range);
  CHECK_THROWS_AS(project(p, {}, -1), std::out_of_range);
}

TEST_CASE("projection keeps source locations") {
  Protocol p = parse_protocol("nprocs 2.\nmessage(0,1,MPI_INT,1).\nloop(end).\nend");
  LocalType l = project(p, {}, 0);
  CHECK(l.loc() == SourceLoc{2, 1});
  CHECK(std::get<PrefixNode<LocalAtom>>(l.node().value).cont.loc() == SourceLoc{3, 1});
}

TEST_CASE("projection matches the reference on random protocols") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 300; ++i) {
    auto g = testing::random_protocol(rng);
    const Protocol& p = g.protocol;
    ProjectionResult all = project_all(p, g.inst);
    REQUIRE(all.locals.size() == static_cast<std::size_t>(p.num_procs));
    Tokens global_skeleton = skeleton(reference_projection(p.body, -1, g.inst.values));
    Tokens global_collectives = collectives(reference_projection(p.body, -1, g.inst.values));
    for (std::int64_t r = 0; r < p.num_procs; ++r) {
      const LocalType& l = all.locals[static_cast<std::size_t>(r)];
      CHECK(l == project(p, g.inst, r));
      Tokens got = local_tokens(l);
      CHECK_MESSAGE(got == reference_projection(p.body, r, g.inst.values), print_protocol(p));
      // Structure and collective preservation.
      CHECK(skeleton(got) == global_skeleton);
      CHECK(collectives(got) == global_collectives);
    }
    CHECK(testing::conservation_mismatches(p.body, all.locals, g.inst.values).empty());
  }
}
