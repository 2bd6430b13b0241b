#include "doctest.h"

#include "spv/term.hpp"

#include <set>
#include <sstream>
#include <vector>

using namespace spv;

TEST_CASE("constants, variables, and keys") {
    Term a = Term::constant("a");
    Term x = Term::variable("x");
    Term k = Term::key("k");

    CHECK(a.kind() == Term::Kind::Const);
    CHECK(a.name() == "a");
    CHECK(x.kind() == Term::Kind::Var);
    CHECK_FALSE(x.is_key_var());
    CHECK(k.kind() == Term::Kind::Var);
    CHECK(k.is_key_var());

    CHECK(a == Term::constant("a"));
    CHECK(a != Term::constant("b"));
    CHECK(x != Term::variable("x", true));  // same name, different role
}

TEST_CASE("sequences flatten and drop the neutral element") {
    Term a = Term::constant("a");
    Term b = Term::constant("b");
    Term eps = Term::epsilon();

    CHECK(eps.is_epsilon());
    CHECK(eps.kind() == Term::Kind::Seq);
    CHECK(Term::sequence({}) == eps);

    // singleton collapses to the element itself
    CHECK(Term::sequence({a}) == a);

    // nested sequences flatten
    Term nested = Term::sequence({Term::sequence({a, b}), a});
    REQUIRE(nested.kind() == Term::Kind::Seq);
    CHECK(nested.items().size() == 3);
    CHECK(nested == Term::sequence({a, b, a}));

    // epsilon disappears inside a concatenation
    CHECK(Term::sequence({eps, a, eps, b}) == Term::sequence({a, b}));
    CHECK(Term::sequence({eps, eps}) == eps);
    CHECK(Term::sequence({a, eps}) == a);

    // no sequence directly contains a sequence or epsilon
    for (const Term& it : nested.items()) {
        CHECK(it.kind() != Term::Kind::Seq);
        CHECK_FALSE(it.is_epsilon());
    }
}

TEST_CASE("encryption keeps key position restricted to key variables") {
    Term k = Term::key("k");
    Term a = Term::constant("a");
    Term e = Term::encryption(k, a);
    CHECK(e.kind() == Term::Kind::Enc);
    CHECK(e.enc_key() == k);
    CHECK(e.enc_body() == a);

    CHECK_THROWS_AS(Term::encryption(a, a), KeyPositionViolation);
    CHECK_THROWS_AS(Term::encryption(Term::variable("x"), a), KeyPositionViolation);
    CHECK_THROWS_AS(Term::encryption(Term::sequence({k, k}), a), KeyPositionViolation);
}

TEST_CASE("printing") {
    Term k = Term::key("k");
    Term body = Term::sequence({Term::constant("a"), Term::variable("y")});
    CHECK(Term::constant("a").str() == "'a'");
    CHECK(Term::variable("x").str() == "x");
    CHECK(k.str() == "k");
    CHECK(Term::epsilon().str() == "()");
    CHECK(body.str() == "('a', y)");
    CHECK(Term::encryption(k, body).str() == "k(('a', y))");

    std::ostringstream os;
    os << body;
    CHECK(os.str() == body.str());
}

TEST_CASE("ordering is total and groups by kind") {
    Term a = Term::constant("a");
    Term x = Term::variable("x");
    Term k = Term::key("k");
    Term e = Term::encryption(k, a);
    Term s = Term::sequence({a, x});

    CHECK(a < x);  // Const < Var
    CHECK(x < e);  // Var < Enc
    CHECK(e < s);  // Enc < Seq

    std::vector<Term> ts{s, e, x, a, k};
    std::sort(ts.begin(), ts.end());
    CHECK(std::is_sorted(ts.begin(), ts.end()));
    CHECK(ts.front() == a);
    CHECK(ts.back() == s);

    CHECK((a <=> a) == std::strong_ordering::equal);
    CHECK(std::set<Term>{a, a, x}.size() == 2);
}

TEST_CASE("vars and substitution") {
    Term k = Term::key("k");
    Term t = Term::encryption(k, Term::sequence({Term::variable("x"), Term::constant("a"),
                                                 Term::variable("y")}));
    std::set<std::string> vs = vars(t);
    CHECK(vs == std::set<std::string>{"k", "x", "y"});

    Substitution sub{{"x", Term::constant("b")}, {"y", Term::epsilon()}};
    Term r = substitute(t, sub);
    // y |-> () collapses the pair around it
    CHECK(r == Term::encryption(k, Term::sequence({Term::constant("b"),
                                                   Term::constant("a")})));
    CHECK(vars(r) == std::set<std::string>{"k"});

    // substituting a key variable by another key is allowed
    Term r2 = substitute(t, Substitution{{"k", Term::key("k2")}});
    CHECK(r2.enc_key() == Term::key("k2"));
}

TEST_CASE("normalize is the identity on factory-built terms") {
    Term t = Term::encryption(Term::key("k"),
                              Term::sequence({Term::constant("a"), Term::variable("x")}));
    CHECK(normalize(t) == t);
    CHECK(normalize(Term::epsilon()) == Term::epsilon());
}

TEST_CASE("hashing agrees with equality") {
    Term s1 = Term::sequence({Term::constant("a"), Term::variable("x")});
    Term s2 = Term::sequence({Term::sequence({Term::constant("a")}), Term::variable("x")});
    CHECK(s1 == s2);
    CHECK(s1.hash() == s2.hash());
    CHECK(std::hash<Term>{}(s1) == std::hash<Term>{}(s2));
}
