#include "spv/formula.hpp"

#include "congruence.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>
#include <utility>

namespace spv {

Atom::Atom(Kind kind, std::vector<Term> terms, std::vector<Term> pool)
    : kind_(kind), terms_(std::move(terms)), pool_(std::move(pool)) {}

Atom Atom::eq(Term lhs, Term rhs) {
    if (rhs < lhs) std::swap(lhs, rhs);
    return Atom(Kind::Eq, {std::move(lhs), std::move(rhs)}, {});
}

Atom Atom::in(Term member, std::vector<Term> pool) {
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    return Atom(Kind::In, {std::move(member)}, std::move(pool));
}

bool Atom::operator==(const Atom& other) const {
    return (*this <=> other) == std::strong_ordering::equal;
}

std::strong_ordering Atom::operator<=>(const Atom& other) const {
    if (auto c = static_cast<int>(kind_) <=> static_cast<int>(other.kind_); c != 0) return c;
    if (auto c = terms_ <=> other.terms_; c != 0) return c;
    return pool_ <=> other.pool_;
}

std::string Atom::str() const {
    std::ostringstream os;
    if (kind_ == Kind::Eq) {
        os << '(' << lhs() << " = " << rhs() << ')';
    } else {
        os << '(' << member() << " in {";
        bool first = true;
        for (const auto& t : pool_) {
            if (!first) os << ", ";
            first = false;
            os << t;
        }
        os << "})";
    }
    return os.str();
}

Formula Formula::falsum() {
    return Formula({Atom::eq(Term::constant("0"), Term::constant("1"))});
}

Formula Formula::of(std::vector<Atom> atoms) {
    // Split ciphertext equations until fixpoint, dropping trivial atoms.
    std::vector<Atom> work(std::move(atoms));
    std::vector<Atom> done;
    while (!work.empty()) {
        Atom a = std::move(work.back());
        work.pop_back();
        if (a.kind() == Atom::Kind::Eq) {
            if (a.lhs() == a.rhs()) continue;
            if (a.lhs().kind() == Term::Kind::Enc && a.rhs().kind() == Term::Kind::Enc) {
                work.push_back(Atom::eq(a.lhs().enc_key(), a.rhs().enc_key()));
                work.push_back(Atom::eq(a.lhs().enc_body(), a.rhs().enc_body()));
                continue;
            }
            done.push_back(std::move(a));
        } else {
            if (a.pool().empty()) return falsum();  // membership in nothing
            if (std::find(a.pool().begin(), a.pool().end(), a.member()) != a.pool().end()) {
                continue;  // trivially true
            }
            done.push_back(std::move(a));
        }
    }
    std::sort(done.begin(), done.end());
    done.erase(std::unique(done.begin(), done.end()), done.end());
    return Formula(std::move(done));
}

std::string Formula::str() const {
    std::ostringstream os;
    os << *this;
    return os.str();
}

std::ostream& operator<<(std::ostream& os, const Formula& f) {
    if (f.is_top()) return os << "true";
    bool first = true;
    for (const auto& a : f.atoms()) {
        if (!first) os << " & ";
        first = false;
        os << a.str();
    }
    return os;
}

Formula conjoin(const Formula& b1, const Formula& b2) {
    std::vector<Atom> atoms = b1.atoms();
    atoms.insert(atoms.end(), b2.atoms().begin(), b2.atoms().end());
    return Formula::of(std::move(atoms));
}

bool is_false(const Formula& b) {
    internal::TermGraph g;
    g.assert_equalities(b);
    return g.contradictory();
}

namespace {

// Membership goal: the member must be derivable from the pool under the
// premise's equalities, or the premise must carry a matching membership atom
// (same member and pool up to the premise's congruence).
bool membership_holds(internal::TermGraph& premise_graph, const Formula& premise,
                      const Atom& goal) {
    {
        internal::TermGraph pool_graph;
        pool_graph.assert_equalities(premise);
        for (const auto& t : goal.pool()) pool_graph.disclose(t);
        if (pool_graph.derivable(goal.member())) return true;
    }
    for (const auto& a : premise.atoms()) {
        if (a.kind() != Atom::Kind::In) continue;
        if (!premise_graph.same(a.member(), goal.member())) continue;
        if (a.pool().size() != goal.pool().size()) continue;
        bool pools_match = true;
        for (std::size_t i = 0; i < a.pool().size() && pools_match; ++i) {
            bool found = false;
            for (std::size_t j = 0; j < goal.pool().size() && !found; ++j) {
                found = premise_graph.same(a.pool()[i], goal.pool()[j]);
            }
            pools_match = found;
        }
        if (pools_match) return true;
    }
    return false;
}

}  // namespace

bool entails(const Formula& b1, const Formula& b2) {
    internal::TermGraph g;
    g.assert_equalities(b1);
    if (g.contradictory()) return true;
    for (const auto& goal : b2.atoms()) {
        if (goal.kind() == Atom::Kind::Eq) {
            if (!g.same(goal.lhs(), goal.rhs())) return false;
        } else {
            if (!membership_holds(g, b1, goal)) return false;
        }
    }
    return true;
}

bool equivalent(const Formula& b1, const Formula& b2) {
    return entails(b1, b2) && entails(b2, b1);
}

bool eq_under(const Formula& b, const Term& e1, const Term& e2) {
    internal::TermGraph g;
    g.assert_equalities(b);
    if (g.contradictory()) return true;
    return g.same(e1, e2);
}

bool satisfiable_given_names(const Formula& b, const std::set<std::string>& names) {
    internal::TermGraph g;
    g.assert_equalities(b);
    if (g.contradictory()) return false;
    return !g.names_clash(names);
}

std::set<std::string> vars(const Formula& f) {
    std::set<std::string> out;
    auto absorb = [&out](const Term& t) {
        auto vs = vars(t);
        out.insert(vs.begin(), vs.end());
    };
    for (const auto& a : f.atoms()) {
        if (a.kind() == Atom::Kind::Eq) {
            absorb(a.lhs());
            absorb(a.rhs());
        } else {
            absorb(a.member());
            for (const auto& t : a.pool()) absorb(t);
        }
    }
    return out;
}

Formula substitute(const Formula& f, const Substitution& s) {
    std::vector<Atom> atoms;
    atoms.reserve(f.atoms().size());
    for (const auto& a : f.atoms()) {
        if (a.kind() == Atom::Kind::Eq) {
            atoms.push_back(Atom::eq(substitute(a.lhs(), s), substitute(a.rhs(), s)));
        } else {
            std::vector<Term> pool;
            pool.reserve(a.pool().size());
            for (const auto& t : a.pool()) pool.push_back(substitute(t, s));
            atoms.push_back(Atom::in(substitute(a.member(), s), std::move(pool)));
        }
    }
    return Formula::of(std::move(atoms));
}

}  // namespace spv
