#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "commtype/protocol.hpp"
#include "support/generators.hpp"

using namespace commtype;

namespace {

std::string read_data(const std::string& name) {
  std::ifstream in(std::string(COMMTYPE_DATA_DIR) + "/" + name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SyntaxError syntax_error(std::string_view text) {
  try {
    parse_protocol(text);
  } catch (const SyntaxError& e) {
    return e;
  }
  FAIL("parsed: " << text);
  return SyntaxError({}, "");
}

int count_atoms(const GlobalType& t) {
  const auto& v = t.node().value;
  if (const auto* p = std::get_if<PrefixNode<GlobalAtom>>(&v)) return 1 + count_atoms(p->cont);
  if (const auto* l = std::get_if<LoopNode<GlobalAtom>>(&v)) {
    return count_atoms(l->body) + count_atoms(l->cont);
  }
  if (const auto* c = std::get_if<ChoiceNode<GlobalAtom>>(&v)) {
    return count_atoms(c->on_true) + count_atoms(c->on_false) + count_atoms(c->cont);
  }
  return 0;
}

}  // namespace

TEST_CASE("finite differences protocol structure") {
  Protocol p = parse_protocol(read_data("fdiff.cty"));
  REQUIRE(p.binders.size() == 1);
  CHECK(p.binders[0].name == "size");
  CHECK(to_string(p.binders[0].kind) == "{n:nat|n%3==0}");
  CHECK(p.num_procs == 3);

  const auto& scatter = std::get<PrefixNode<GlobalAtom>>(p.body.node().value);
  CHECK(std::holds_alternative<ScatterAtom>(scatter.atom));
  CHECK(to_string(scatter.atom) == "scatter(0,MPI_FLOAT,size/3)");

  const auto& loop = std::get<LoopNode<GlobalAtom>>(scatter.cont.node().value);
  GlobalType body = loop.body;
  int messages = 0;
  while (body.is_prefix()) {
    const auto& node = std::get<PrefixNode<GlobalAtom>>(body.node().value);
    messages += std::holds_alternative<MessageAtom>(node.atom);
    body = node.cont;
  }
  CHECK(messages == 6);
  CHECK(count_atoms(loop.body) == 7);

  const auto& choice = std::get<ChoiceNode<GlobalAtom>>(loop.cont.node().value);
  CHECK(print(choice.on_true) == "gather(0,MPI_FLOAT,size/3).\nend\n");
  CHECK(choice.on_false.is_end());
  CHECK(choice.cont.is_end());
}

TEST_CASE("degenerate protocols") {
  Protocol e = parse_protocol("end");
  CHECK(e.binders.empty());
  CHECK(e.num_procs == 2);
  CHECK(e.body.is_end());
  CHECK(print_protocol(e) == "nprocs 2.\nend\n");
  CHECK(print(e.body) == "end\n");

  Protocol l = parse_protocol("loop(end).end");
  REQUIRE(l.body.is_loop());
  CHECK(std::get<LoopNode<GlobalAtom>>(l.body.node().value).body.is_end());

  Protocol c = parse_protocol("nprocs 4. choice(end, end).end");
  CHECK(c.num_procs == 4);
  CHECK(c.body.is_choice());
}

TEST_CASE("source locations") {
  Protocol p = parse_protocol("Pi k: nat.\nnprocs 3.\n  message(0,1,MPI_INT,k).\nend");
  CHECK(p.binders[0].loc == SourceLoc{1, 1});
  CHECK(p.num_procs_loc == SourceLoc{2, 1});
  CHECK(p.body.loc() == SourceLoc{3, 3});
}

TEST_CASE("comments and whitespace") {
  Protocol a = parse_protocol("// header\nnprocs 2. // two ranks\nmessage(0,1,MPI_INT,1). // hi\nend");
  Protocol b = parse_protocol("nprocs 2.message(0,1,MPI_INT,1).end");
  CHECK(a == b);
}

TEST_CASE("syntax errors carry position and expected tokens") {
  auto e = syntax_error("nprocs 2.\nmessage(0,1,MPI_INT,1)\nend");
  CHECK(e.loc() == SourceLoc{3, 1});
  CHECK(std::find(e.expected().begin(), e.expected().end(), "'.'") != e.expected().end());

  e = syntax_error("nprocs 2. message(0,1,MPI_DOUBLE,1).end");
  CHECK(e.loc() == SourceLoc{1, 23});

  e = syntax_error("nprocs 2. loop(end.end");
  CHECK(e.loc().known());

  e = syntax_error("nprocs 2. send(1,MPI_INT,1).end");
  CHECK(e.loc() == SourceLoc{1, 11});

  e = syntax_error("end end");
  CHECK(e.loc() == SourceLoc{1, 5});

  e = syntax_error("Pi size: {n:nat|n%3==0}\nnprocs 3. end");
  CHECK(e.loc() == SourceLoc{2, 1});
}

TEST_CASE("nprocs must be a literal") {
  CHECK_THROWS_AS(parse_protocol("Pi k: nat. nprocs k. end"), SyntaxError);
  CHECK_THROWS_AS(parse_protocol("nprocs 2+1. end"), SyntaxError);
}

TEST_CASE("binders are top level only") {
  CHECK_THROWS_AS(parse_protocol("nprocs 2. loop(Pi k: nat. end).end"), SyntaxError);
  CHECK_THROWS_AS(parse_protocol("nprocs 2. Pi k: nat. end"), SyntaxError);
}

TEST_CASE("local types and rank files") {
  LocalType t = parse_local_type("send(2,MPI_FLOAT,1).recv(1,MPI_FLOAT,1).end");
  CHECK(print(t) == "send(2,MPI_FLOAT,1).\nreceive(1,MPI_FLOAT,1).\nend\n");
  CHECK(parse_local_type(print(t)) == t);
  CHECK_THROWS_AS(parse_local_type("message(0,1,MPI_INT,1).end"), SyntaxError);
  CHECK_THROWS_AS(parse_global_type("send(0,MPI_INT,1).end"), SyntaxError);

  LocalTypeFile f = parse_local_type_file("rank 1.\nnprocs 3.\nallreduce(MPI_INT,1,MPI_SUM).end");
  CHECK(f.rank == 1);
  CHECK(f.num_procs == 3);
  CHECK(parse_local_type_file(print_local_type_file(f)) == f);
  CHECK(parse_local_type_file("end").rank == std::nullopt);
}

TEST_CASE("round trip on the bundled protocol") {
  Protocol p = parse_protocol(read_data("fdiff.cty"));
  std::string text = print_protocol(p);
  CHECK(parse_protocol(text) == p);
  CHECK(print_protocol(parse_protocol(text)) == text);
}

TEST_CASE("round trip on random protocols") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 300; ++i) {
    auto g = testing::random_protocol(rng);
    std::string text = print_protocol(g.protocol);
    Protocol back = parse_protocol(text);
    CHECK_MESSAGE(back == g.protocol, text);
    CHECK(print_protocol(back) == text);
  }
}

TEST_CASE("round trip on random local types") {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 300; ++i) {
    LocalType t = testing::random_local_type(rng);
    CHECK(parse_local_type(print(t)) == t);
  }
}

TEST_CASE("parsing is total") {
  std::mt19937_64 rng(1);
  std::string seed = read_data("fdiff.cty");
  auto total = [](const std::string& text) {
    try {
      parse_protocol(text);
    } catch (const SyntaxError& e) {
      return e.loc().known();
    } catch (...) {
      return false;
    }
    return true;
  };
  for (int i = 0; i < 3000; ++i) {
    std::string text = i % 2 ? testing::random_text(rng, 80) : testing::mutate_text(rng, seed);
    CHECK_MESSAGE(total(text), text);
  }
}

TEST_CASE("deep nesting is rejected, not a stack overflow") {
  std::string deep;
  for (int i = 0; i < 5000; ++i) deep += "loop(";
  CHECK_THROWS_AS(parse_protocol(deep), SyntaxError);
  std::string parens(5000, '(');
  CHECK_THROWS_AS(parse_protocol("nprocs 2. message(" + parens), SyntaxError);
}
