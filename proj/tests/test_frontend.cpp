#include "doctest.h"

#include "spv/protocol.hpp"

#include "json.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace spv;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE_MESSAGE(in.good(), path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string shipped(const std::string& name) {
    return slurp(std::string(SPV_PROTOCOL_DIR) + "/" + name + ".spv");
}

// structural fingerprint: names, edges, frames, hidden names
void check_same_graph(const Process& p, const Process& q) {
    REQUIRE(p.state_count() == q.state_count());
    CHECK(p.state_names() == q.state_names());
    CHECK(p.state_name(p.initial()) == q.state_name(q.initial()));
    CHECK(p.initial_frame() == q.initial_frame());
    CHECK(p.hidden() == q.hidden());
    std::multiset<std::string> pe, qe;
    for (const Transition& t : p.transitions())
        pe.insert(p.state_name(t.from) + "|" + t.act.str() + "|" + p.state_name(t.to));
    for (const Transition& t : q.transitions())
        qe.insert(q.state_name(t.from) + "|" + t.act.str() + "|" + q.state_name(t.to));
    CHECK(pe == qe);
}

int line_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const ParseError& e) {
        return e.line;
    }
    return -1;
}

const std::string kTinyRepl = R"(protocol tiny_repl

channels: c
consts: m

agent A {
  out(c, m);
}

system: repl(A, 2)
)";

}  // namespace

TEST_CASE("printed terms parse back") {
    const std::set<std::string> keys{"k", "k_a"};
    const Term x = Term::variable("x");
    const Term k = Term::key("k");
    for (const Term& t : {
             Term::constant("m"),
             x,
             k,
             Term::encryption(k, x),
             Term::encryption(Term::key("k_a"), Term::sequence({x, Term::constant("m")})),
             Term::sequence({x, Term::variable("y"), Term::constant("m")}),
             Term::epsilon(),
             Term::sequence({Term::epsilon(), x}),  // normalizes to x
         }) {
        CAPTURE(t.str());
        CHECK(term_from_string(t.str(), keys) == t);
    }

    // whitespace is free, keys are recognized by name
    CHECK(term_from_string(" ( x ,  'm' ) ", keys) ==
          Term::sequence({x, Term::constant("m")}));
    CHECK_THROWS_AS(term_from_string("k(x", keys), ParseError);
    CHECK_THROWS_AS(term_from_string("x y", keys), ParseError);
}

TEST_CASE("printed formulas parse back") {
    const std::set<std::string> keys{"k"};
    const Term x = Term::variable("x");
    const Term y = Term::variable("y");
    const Term m = Term::constant("m");
    for (const Formula& f : {
             Formula::top(),
             Formula::eq(x, m),
             Formula::of({Atom::eq(x, y), Atom::eq(y, m)}),
             Formula::of({Atom::in(x, {m, Term::encryption(Term::key("k"), y)})}),
             Formula::falsum(),
         }) {
        CAPTURE(f.str());
        CHECK(formula_from_string(f.str(), keys) == f);
    }
    CHECK_THROWS_AS(formula_from_string("x =", keys), ParseError);
    CHECK_THROWS_AS(formula_from_string("(x = y) &", keys), ParseError);
}

TEST_CASE("parse errors carry positions") {
    CHECK(line_of([] {
        parse("protocol p\n\nchannels: c\nvars: x\n\nagent A {\n  out(c, zz);\n}\n\nsystem: A\n");
    }) == 7);

    // encrypting with a non-key
    try {
        parse("protocol p\n\nchannels: c\nvars: x, y\n\nagent A {\n  out(c, enc(x, y));\n}\n\nsystem: A\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("not a key") != std::string::npos);
        CHECK(e.line == 7);
    }

    // a channel position wants a channel
    try {
        parse("protocol p\n\nchannels: c\nvars: x\n\nagent A {\n  out(x, x);\n}\n\nsystem: A\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("not a channel") != std::string::npos);
    }

    // cont must close the agent body
    CHECK_THROWS_AS(
        parse("protocol p\n\nchannels: c\nvars: x\n\nagent A {\n  cont P;\n  out(c, x);\n}\n\nsystem: A\n"),
        ParseError);

    // replication needs a positive count
    CHECK_THROWS_AS(
        parse("protocol p\n\nchannels: c\nvars: x\n\nagent A {\n  out(c, x);\n}\n\nsystem: repl(A, 0)\n"),
        ParseError);

    // a system section is mandatory
    CHECK_THROWS_AS(parse("protocol p\n\nchannels: c\nvars: x\n\nagent A {\n  out(c, x);\n}\n"),
                    ParseError);

    // duplicate declarations and agents
    CHECK_THROWS_AS(parse("protocol p\n\nchannels: c\nvars: c\n\nagent A {\n  out(c, c);\n}\n\nsystem: A\n"),
                    ParseError);

    // constants may not look like primed variables
    CHECK_THROWS_AS(parse("protocol p\n\nchannels: c\nconsts: m'\n\nagent A {\n  out(c, m');\n}\n\nsystem: A\n"),
                    ParseError);

    CHECK_THROWS_AS(builtin("nope"), UnknownProtocol);
}

TEST_CASE("built-in systems have the documented shapes") {
    ProtocolSystem hc = builtin("hidden_channel");
    CHECK(hc.system.state_count() == 4);
    CHECK(hc.system.transitions().size() == 5);
    CHECK(hc.modifiedSystem.state_count() == 6);
    CHECK(hc.system.hidden() == std::set<std::string>{"c"});
    CHECK(hc.secret == "x");
    CHECK(hc.observed == "y");

    ProtocolSystem em = builtin("enc_message");
    CHECK(em.system.state_count() == 4);
    CHECK(em.system.hidden() == std::set<std::string>{"k"});
    CHECK(em.system.initial_frame().disclosed == std::vector<Term>{Term::variable("c")});

    ProtocolSystem tc = builtin("trusted_channel");
    CHECK(tc.system.state_count() == 27);
    CHECK(tc.system.transitions().size() == 78);
    CHECK(tc.system.hidden() == std::set<std::string>{"c", "c_a", "c_b"});

    ProtocolSystem wmf = builtin("wmf");
    CHECK(wmf.system.state_count() == 27);
    CHECK(wmf.system.transitions().size() == 78);
    CHECK(wmf.modifiedSystem.state_count() == 36);
    CHECK(wmf.system.hidden() == std::set<std::string>{"k", "k_a", "k_b"});
    CHECK(wmf.agents.at("A").state_count() == 3);
    CHECK(wmf.agents.at("T").state_count() == 3);
    CHECK(wmf.agents.at("B").state_count() == 3);
    CHECK(wmf.agents.at("Bmod").state_count() == 4);

    // every builtin leaves a 2-state continuation stub publishing a constant
    for (const std::string& n : builtin_names()) {
        ProtocolSystem ps = builtin(n);
        CHECK(ps.continuation.state_count() == 2);
        REQUIRE(ps.continuation.transitions().size() == 1);
        const Action& act = ps.continuation.transitions()[0].act;
        CHECK(act.kind == Action::Kind::Output);
        CHECK(act.payload.kind() == Term::Kind::Const);
    }
}

TEST_CASE("built-in sources match the shipped files") {
    for (const std::string& n : builtin_names()) {
        CAPTURE(n);
        ProtocolSystem mem = builtin(n);
        std::string text = shipped(n);
        CHECK(mem.source == text);
        ProtocolSystem fromFile = parse(text);
        check_same_graph(mem.system, fromFile.system);
        check_same_graph(mem.modifiedSystem, fromFile.modifiedSystem);
    }
}

TEST_CASE("pretty printing round-trips") {
    for (const std::string& n : builtin_names()) {
        CAPTURE(n);
        ProtocolSystem ps = builtin(n);
        ProtocolSystem again = parse(pretty_print(ps));
        CHECK(again.name == ps.name);
        check_same_graph(ps.system, again.system);
        check_same_graph(ps.modifiedSystem, again.modifiedSystem);
        check_same_graph(ps.continuation, again.continuation);
    }
}

TEST_CASE("the replication bound overrides literal counts") {
    ProtocolSystem two = parse(kTinyRepl);
    CHECK(two.system.state_count() == 4);  // 2 states, squared
    ProtocolSystem three = parse(kTinyRepl, 3);
    CHECK(three.system.state_count() == 8);
    ProtocolSystem one = parse(kTinyRepl, 1);
    CHECK(one.system.state_count() == 2);
}

TEST_CASE("verification reports serialize to JSON") {
    ProtocolSystem ps = builtin("hidden_channel");
    VerificationReport r = verify_integrity(ps, 2'000'000);
    CHECK(r.verdict == "holds");
    CHECK(r.property == "integrity");
    CHECK_FALSE(r.witness_json.empty());

    nlohmann::json j = nlohmann::json::parse(report_to_json(r));
    CHECK(j.at("protocol") == "hidden_channel");
    CHECK(j.at("property") == "integrity");
    CHECK(j.at("verdict") == "holds");
    CHECK(j.at("stats").at("states_explored").get<std::uint64_t>() > 0);
    CHECK(j.at("stats").at("wall_ms").get<double>() >= 0.0);
    CHECK(j.contains("witness"));
}

TEST_CASE("witnesses survive a JSON round-trip") {
    ProtocolSystem ps = builtin("hidden_channel");
    auto [left, right] = integrity_pair(ps);
    SearchResult res = search_witness(left, right, 2'000'000);
    REQUIRE(res.outcome == SearchOutcome::Found);

    std::string text = witness_to_json(*res.witness, left, right);
    EquivalenceWitness back = witness_from_json(text, left, right, ps.keys);
    std::string why;
    CHECK_MESSAGE(check_witness(left, right, back, &why), why);

    SUBCASE("dropping a relation entry is caught by the checker") {
        nlohmann::json j = nlohmann::json::parse(text);
        REQUIRE(j.at("relation").size() >= 1);
        j["relation"].erase(0);
        EquivalenceWitness bad = witness_from_json(j.dump(), left, right, ps.keys);
        CHECK_FALSE(check_witness(left, right, bad, &why));
        CHECK_FALSE(why.empty());
    }

    SUBCASE("unknown state names are rejected at parse time") {
        nlohmann::json j = nlohmann::json::parse(text);
        j["labelings"]["left"]["Zz9"] = {{"cond", "true"}, {"disclosed", nlohmann::json::array()}};
        CHECK_THROWS_AS(witness_from_json(j.dump(), left, right, ps.keys),
                        std::runtime_error);
    }

    SUBCASE("a tampered condition is caught by the checker") {
        nlohmann::json j = nlohmann::json::parse(text);
        auto& labels = j.at("labelings").at("left");
        REQUIRE(labels.size() >= 1);
        labels.begin().value()["cond"] = "(x = 'zzz')";
        EquivalenceWitness bad = witness_from_json(j.dump(), left, right, ps.keys);
        CHECK_FALSE(check_witness(left, right, bad, &why));
    }
}

TEST_CASE("DOT export lists every state and edge") {
    ProtocolSystem ps = builtin("hidden_channel");
    std::string dot = export_dot(ps.system);
    CHECK(dot.find("digraph") != std::string::npos);
    CHECK(dot.find("doublecircle") != std::string::npos);  // initial state
    for (int s = 0; s < ps.system.state_count(); ++s)
        CHECK(dot.find("\"" + ps.system.state_name(s) + "\"") != std::string::npos);
    for (const Transition& t : ps.system.transitions()) {
        std::string label = t.act.str();
        // quotes inside labels are escaped on the way out
        CHECK(dot.find(label.substr(0, label.find('\''))) != std::string::npos);
    }
}

TEST_CASE("secrecy is inconclusive when the continuation leaks") {
    // the continuation publishes the received value on a public channel, so
    // the premise of the secrecy implication already fails
    const std::string src = R"(protocol leaky_continuation

channels: c, d
vars: x, y, y'
secret: x
observed: y

agent A {
  out(c, x);
}

agent B {
  in(c, y);
  cont C;
}

agent Bmod {
  in(c, y');
  assert(y' = x);
  cont C;
}

agent C {
  out(d, y);
}

system: hide(c) { par(A, B) }
modified: hide(c) { par(A, Bmod) }
continuation: C
)";
    ProtocolSystem ps = parse(src);
    VerificationReport r = verify_secrecy(ps, 2'000'000);
    CHECK(r.verdict == "inconclusive");
    CHECK(r.evidence.find("premise fails") != std::string::npos);
}

TEST_CASE("leaking the encryption key breaks enc_message") {
    std::string src = builtin("enc_message").source;
    // the sender also discloses the key
    const std::string anchor = "out(c, enc(k, x));";
    auto at = src.find(anchor);
    REQUIRE(at != std::string::npos);
    src.insert(at + anchor.size(), "\n  out(c, k);");
    ProtocolSystem leak = parse(src);

    CHECK(verify_secrecy(leak, 2'000'000).verdict == "refuted");
    CHECK(verify_integrity(leak, 2'000'000).verdict == "refuted");

    // sanity: the unmodified protocol passes both
    ProtocolSystem ok = builtin("enc_message");
    CHECK(verify_secrecy(ok, 2'000'000).verdict == "holds");
    CHECK(verify_integrity(ok, 2'000'000).verdict == "holds");
}

TEST_CASE("secrecy needs declared secret and observed variables") {
    ProtocolSystem cp = parse(shipped("cipher_pair"));
    CHECK(cp.secret.empty());
    VerificationReport r = verify_secrecy(cp, 2'000'000);
    CHECK(r.verdict == "inconclusive");
}
