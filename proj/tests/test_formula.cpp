#include "doctest.h"

#include "oracles.hpp"
#include "spv/formula.hpp"

#include <set>
#include <vector>

using namespace spv;

namespace {

const Term a = Term::constant("a");
const Term b = Term::constant("b");
const Term x = Term::variable("x");
const Term y = Term::variable("y");
const Term z = Term::variable("z");
const Term k1 = Term::key("k1");
const Term k2 = Term::key("k2");

}  // namespace

TEST_CASE("atoms canonicalize") {
    CHECK(Atom::eq(x, a) == Atom::eq(a, x));  // sides in term order
    CHECK(Atom::in(x, {b, a, b}).pool() == std::vector<Term>{a, b});
    CHECK(Atom::eq(a, x).str() == "('a' = x)");
    CHECK(Atom::in(x, {a, b}).str() == "(x in {'a', 'b'})");
}

TEST_CASE("conjunction normal form") {
    CHECK(Formula::top().is_top());
    CHECK(Formula::top().str() == "true");
    CHECK(Formula::of({}).is_top());

    // trivial atoms vanish
    CHECK(Formula::of({Atom::eq(x, x)}).is_top());
    CHECK(Formula::of({Atom::in(a, {a, b})}).is_top());

    // duplicates collapse, atoms are sorted
    Formula f1 = Formula::of({Atom::eq(x, a), Atom::eq(y, b), Atom::eq(x, a)});
    Formula f2 = Formula::of({Atom::eq(y, b), Atom::eq(a, x)});
    CHECK(f1 == f2);
    CHECK(f1.atoms().size() == 2);

    // empty membership pool is unsatisfiable
    CHECK(Formula::of({Atom::in(x, {})}) == Formula::falsum());
    CHECK(is_false(Formula::falsum()));

    // ciphertext equations split by perfect encryption
    Formula split = Formula::of({Atom::eq(Term::encryption(k1, x), Term::encryption(k2, y))});
    CHECK(split == Formula::of({Atom::eq(k1, k2), Atom::eq(x, y)}));
}

TEST_CASE("conjoin") {
    Formula f = Formula::eq(x, a);
    CHECK(conjoin(f, Formula::top()) == f);
    CHECK(conjoin(Formula::top(), f) == f);
    CHECK(conjoin(f, f) == f);
    CHECK(conjoin(f, Formula::eq(y, b)).atoms().size() == 2);
}

TEST_CASE("unsatisfiability detection") {
    CHECK_FALSE(is_false(Formula::top()));
    CHECK_FALSE(is_false(Formula::eq(x, a)));

    CHECK(is_false(Formula::eq(a, b)));                   // distinct constants
    CHECK(is_false(Formula::eq(a, Term::sequence({x, y}))));  // constant vs pair
    CHECK(is_false(Formula::eq(a, Term::encryption(k1, x))));  // constant vs cipher

    // equalities force two different constants together
    CHECK(is_false(Formula::of({Atom::eq(x, a), Atom::eq(x, b)})));
    // via encryption injectivity
    CHECK(is_false(Formula::of({Atom::eq(Term::encryption(k1, a), Term::encryption(k1, b))})));
    // sequences of incompatible determined lengths
    CHECK(is_false(Formula::of({Atom::eq(Term::sequence({a, b, a}), Term::sequence({a, b}))})));
    // but a variable can still absorb the slack
    CHECK_FALSE(is_false(Formula::of({Atom::eq(Term::sequence({x, y}), Term::sequence({a, b, a}))})));
}

TEST_CASE("entailment basics") {
    Formula xa = Formula::eq(x, a);
    Formula yx = Formula::eq(y, x);
    Formula ya = Formula::eq(y, a);

    CHECK(entails(xa, Formula::top()));
    CHECK(entails(xa, xa));
    CHECK_FALSE(entails(Formula::top(), xa));

    // transitivity through the congruence
    CHECK(entails(conjoin(xa, yx), ya));
    // constructor congruence
    CHECK(entails(xa, Formula::eq(Term::encryption(k1, x), Term::encryption(k1, a))));
    CHECK(entails(xa, Formula::eq(Term::sequence({x, y}), Term::sequence({a, y}))));
    // constructor injectivity
    CHECK(entails(Formula::eq(Term::encryption(k1, x), Term::encryption(k1, y)),
                  Formula::eq(x, y)));
    // sequence concatenation is associative, so (x, b) = (a, y) does NOT pin
    // x and y down: x = (a, t), y = (t, b) also solves it
    CHECK_FALSE(entails(Formula::eq(Term::sequence({x, b}), Term::sequence({a, y})),
                        conjoin(Formula::eq(x, a), Formula::eq(y, b))));
    // ...but fully rigid positions decompose
    CHECK(entails(Formula::eq(Term::sequence({Term::encryption(k1, x), b}),
                              Term::sequence({Term::encryption(k1, a), b})),
                  Formula::eq(x, a)));

    // a contradictory premise entails anything
    CHECK(entails(Formula::falsum(), Formula::eq(a, b)));
    CHECK(entails(Formula::of({Atom::eq(x, a), Atom::eq(x, b)}), Formula::eq(y, z)));
}

TEST_CASE("membership goals") {
    // member reachable from the pool by composition under the premise
    CHECK(entails(Formula::eq(x, a), Formula::of({Atom::in(x, {a, b})})));
    CHECK(entails(Formula::top(), Formula::of({Atom::in(Term::sequence({x, y}), {x, y})})));
    CHECK_FALSE(entails(Formula::top(), Formula::of({Atom::in(x, {a, b})})));

    // syntactic carry-over of a membership premise
    Formula mem = Formula::of({Atom::in(x, {a, b})});
    CHECK(entails(mem, mem));
    CHECK(entails(conjoin(mem, Formula::eq(y, x)), Formula::of({Atom::in(y, {a, b})})));
}

TEST_CASE("equivalence and equality under a condition") {
    CHECK(equivalent(Formula::of({Atom::eq(x, a), Atom::eq(y, x)}),
                     Formula::of({Atom::eq(x, a), Atom::eq(y, a)})));
    CHECK_FALSE(equivalent(Formula::eq(x, a), Formula::eq(x, b)));

    Formula cond = Formula::of({Atom::eq(x, a), Atom::eq(y, a)});
    CHECK(eq_under(cond, x, y));
    CHECK(eq_under(cond, Term::encryption(k1, x), Term::encryption(k1, y)));
    CHECK_FALSE(eq_under(Formula::top(), x, y));
    CHECK(eq_under(Formula::falsum(), x, y));  // vacuously
}

TEST_CASE("satisfiability with pairwise-distinct hidden names") {
    std::set<std::string> hidden{"k1", "k2"};
    CHECK(satisfiable_given_names(Formula::top(), hidden));
    CHECK(satisfiable_given_names(Formula::eq(x, a), hidden));
    // identifying two hidden names is impossible
    CHECK_FALSE(satisfiable_given_names(Formula::eq(k1, k2), hidden));
    CHECK_FALSE(satisfiable_given_names(
        Formula::of({Atom::eq(x, k1), Atom::eq(x, k2)}), hidden));
    // but equating a free variable with one hidden name is fine
    CHECK(satisfiable_given_names(Formula::eq(x, k1), hidden));
    // unrelated contradictions are still caught
    CHECK_FALSE(satisfiable_given_names(Formula::eq(a, b), hidden));
}

TEST_CASE("substitution maps into normal form") {
    Formula f = Formula::of({Atom::eq(x, y)});
    CHECK(substitute(f, Substitution{{"x", a}, {"y", a}}).is_top());
    CHECK(is_false(substitute(f, Substitution{{"x", a}, {"y", b}})));
    CHECK(vars(Formula::of({Atom::in(x, {y, a})})) == std::set<std::string>{"x", "y"});
}

TEST_CASE("entailment is sound over ground instances") {
    // frozen spot checks: whenever entails says yes, every ground instance of
    // the premise satisfies the conclusion
    const std::vector<Term> values{a, b, Term::sequence({a, b})};
    const std::vector<Term> key_values{k1, k2};

    testutil::Gen gen(20260813);
    int verified = 0;
    for (int i = 0; i < 400; ++i) {
        Formula p = gen.formula(2, 2);
        Formula q = gen.formula(2, 2);
        if (!entails(p, q)) continue;
        ++verified;
        bool ok = testutil::for_each_ground_instance(
            {p, q}, values, key_values, [](const std::vector<Formula>& inst) {
                return !testutil::ground_true(inst[0]) || testutil::ground_true(inst[1]);
            });
        CHECK(ok);
    }
    CHECK(verified > 0);
}
