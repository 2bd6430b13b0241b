#pragma once

// Brute-force reference implementations and randomized-input generators for
// the test suites. Everything here recomputes results from first principles
// with plain set fixpoints so the engine under test is never consulted.

#include "spv/formula.hpp"
#include "spv/knowledge.hpp"
#include "spv/process.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace testutil {

using spv::Action;
using spv::Atom;
using spv::Formula;
using spv::Frame;
using spv::Process;
using spv::Term;
using spv::Transition;

// ---------------------------------------------------------------------------
// Syntactic closure on ground frames
// ---------------------------------------------------------------------------

inline void insert_subterms(const Term& t, std::set<Term>& out) {
    out.insert(t);
    switch (t.kind()) {
        case Term::Kind::Enc:
            insert_subterms(t.enc_key(), out);
            insert_subterms(t.enc_body(), out);
            break;
        case Term::Kind::Seq:
            for (const Term& it : t.items()) insert_subterms(it, out);
            break;
        default: break;
    }
}

// Least set containing `disclosed` (plus the empty sequence) and closed,
// within the subterm-closed candidate set, under sequence and encryption
// formation, sequence projection, and decryption with an available key.
// Sound and complete for condition-free frames restricted to candidates.
inline std::set<Term> naive_closure(const std::vector<Term>& disclosed,
                                    std::set<Term> candidates) {
    for (const Term& d : disclosed) insert_subterms(d, candidates);
    {
        std::set<Term> extra;
        for (const Term& c : candidates) insert_subterms(c, extra);
        candidates.insert(extra.begin(), extra.end());
    }
    candidates.insert(Term::epsilon());

    std::set<Term> s(disclosed.begin(), disclosed.end());
    s.insert(Term::epsilon());
    bool changed = true;
    while (changed) {
        changed = false;
        for (const Term& t : candidates) {
            if (s.count(t)) continue;
            bool add = false;
            if (t.kind() == Term::Kind::Seq) {
                add = true;
                for (const Term& it : t.items())
                    if (!s.count(it)) { add = false; break; }
            } else if (t.kind() == Term::Kind::Enc) {
                add = s.count(t.enc_key()) && s.count(t.enc_body());
            }
            if (!add) {
                for (const Term& m : s) {
                    if (m.kind() == Term::Kind::Seq &&
                        std::find(m.items().begin(), m.items().end(), t) !=
                            m.items().end()) {
                        add = true;
                        break;
                    }
                    if (m.kind() == Term::Kind::Enc && m.enc_body() == t &&
                        s.count(m.enc_key())) {
                        add = true;
                        break;
                    }
                }
            }
            if (add) {
                s.insert(t);
                changed = true;
            }
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Ground models of formulas
// ---------------------------------------------------------------------------

inline void collect_var_kinds(const Term& t, std::map<std::string, bool>& out) {
    switch (t.kind()) {
        case Term::Kind::Var: out[t.name()] = t.is_key_var(); break;
        case Term::Kind::Enc:
            collect_var_kinds(t.enc_key(), out);
            collect_var_kinds(t.enc_body(), out);
            break;
        case Term::Kind::Seq:
            for (const Term& it : t.items()) collect_var_kinds(it, out);
            break;
        default: break;
    }
}

inline void collect_var_kinds(const Formula& f, std::map<std::string, bool>& out) {
    for (const Atom& a : f.atoms()) {
        if (a.kind() == Atom::Kind::Eq) {
            collect_var_kinds(a.lhs(), out);
            collect_var_kinds(a.rhs(), out);
        } else {
            collect_var_kinds(a.member(), out);
            for (const Term& t : a.pool()) collect_var_kinds(t, out);
        }
    }
}

// Membership atoms hold when the member is constructible from the pool, so a
// ground In-atom is evaluated against the naive closure of its pool.
inline bool ground_atom_true(const Atom& a) {
    if (a.kind() == Atom::Kind::Eq) return a.lhs() == a.rhs();
    std::set<Term> cands;
    insert_subterms(a.member(), cands);
    return naive_closure(a.pool(), std::move(cands)).count(a.member()) > 0;
}

inline bool ground_true(const Formula& f) {
    for (const Atom& a : f.atoms())
        if (!ground_atom_true(a)) return false;
    return true;
}

// Enumerates every substitution of the formula's variables by the given
// ground values (key variables range over the key values) and calls `fn`
// with the grounded formulas; stops early when `fn` returns false.
inline bool for_each_ground_instance(const std::vector<Formula>& fs,
                                     const std::vector<Term>& values,
                                     const std::vector<Term>& key_values,
                                     const std::function<bool(const std::vector<Formula>&)>& fn) {
    std::map<std::string, bool> kinds;
    for (const Formula& f : fs) collect_var_kinds(f, kinds);
    std::vector<std::pair<std::string, bool>> vars(kinds.begin(), kinds.end());
    std::vector<Formula> grounded(fs.size(), Formula::top());
    std::function<bool(std::size_t, spv::Substitution&)> rec =
        [&](std::size_t i, spv::Substitution& sub) {
            if (i == vars.size()) {
                for (std::size_t k = 0; k < fs.size(); ++k)
                    grounded[k] = substitute(fs[k], sub);
                return fn(grounded);
            }
            const auto& pool = vars[i].second ? key_values : values;
            for (const Term& v : pool) {
                sub.emplace(vars[i].first, v);
                if (!rec(i + 1, sub)) return false;
                sub.erase(vars[i].first);
            }
            return true;
        };
    spv::Substitution sub;
    return rec(0, sub);
}

// ---------------------------------------------------------------------------
// Randomized-input generators
// ---------------------------------------------------------------------------

class Gen {
public:
    explicit Gen(unsigned seed) : rng_(seed) {}

    int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }
    bool coin() { return pick(2) == 0; }

    Term constant() {
        static const char* names[] = {"a", "b", "c0", "d0"};
        return Term::constant(names[pick(4)]);
    }
    Term variable() {
        static const char* names[] = {"x", "y", "z", "w"};
        return Term::variable(names[pick(4)]);
    }
    Term key() {
        static const char* names[] = {"k1", "k2"};
        return Term::key(names[pick(2)]);
    }

    Term term(int depth, bool ground = false) {
        int r = pick(depth > 0 ? 6 : 4);
        switch (r) {
            case 0:
            case 1: return constant();
            case 2: return ground ? constant() : variable();
            case 3: return key();
            case 4: return Term::encryption(key(), term(depth - 1, ground));
            default: {
                std::vector<Term> items;
                int n = 2 + pick(2);
                for (int i = 0; i < n; ++i) items.push_back(term(depth - 1, ground));
                return Term::sequence(std::move(items));
            }
        }
    }

    Atom atom(int depth) {
        if (pick(4) == 0) {
            std::vector<Term> pool;
            int n = 1 + pick(3);
            for (int i = 0; i < n; ++i) pool.push_back(term(depth - 1));
            return Atom::in(term(depth - 1), std::move(pool));
        }
        return Atom::eq(term(depth), term(depth));
    }

    Formula formula(int max_atoms, int depth) {
        std::vector<Atom> atoms;
        int n = pick(max_atoms + 1);
        for (int i = 0; i < n; ++i) atoms.push_back(atom(depth));
        return Formula::of(std::move(atoms));
    }

    // A satisfiable-leaning formula: equations between variables and small
    // ground terms, so closures under it stay informative.
    Formula binding_formula(int max_atoms) {
        std::vector<Atom> atoms;
        int n = pick(max_atoms + 1);
        for (int i = 0; i < n; ++i) {
            Term v = coin() ? variable() : key();
            Term rhs = v.is_key_var() ? key() : term(1, true);
            atoms.push_back(Atom::eq(std::move(v), std::move(rhs)));
        }
        return Formula::of(std::move(atoms));
    }

    std::vector<Term> disclosed_set(int max_size, int depth, bool ground = false) {
        std::vector<Term> out;
        int n = 1 + pick(max_size);
        for (int i = 0; i < n; ++i) out.push_back(term(depth, ground));
        return out;
    }

    Frame frame(int max_size = 4, int depth = 3) {
        return Frame(disclosed_set(max_size, depth), binding_formula(2));
    }

    Action action(int depth) {
        Term chan = Term::variable(pick(2) == 0 ? "ch1" : "ch2");
        switch (pick(3)) {
            case 0: return Action::output(chan, term(depth));
            case 1: return Action::input(chan, term(depth));
            default: return Action::internal(formula(2, depth));
        }
    }

    // Random acyclic process graph with at most `max_states` states.
    Process process(int max_states, int depth = 2) {
        int n = 2 + pick(max_states - 1);
        std::vector<std::string> names;
        for (int i = 0; i < n; ++i) names.push_back("s" + std::to_string(i));
        std::vector<Transition> edges;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (pick(3) == 0) edges.push_back({i, action(depth), j});
        // keep the graph connected enough to be interesting
        if (edges.empty()) edges.push_back({0, action(depth), n - 1});
        std::vector<Term> d0{Term::variable("ch1"), Term::variable("ch2")};
        if (coin()) d0.push_back(constant());
        std::set<std::string> hidden;
        if (coin()) hidden.insert("k1");
        if (pick(3) == 0) hidden.insert("k2");
        return Process(std::move(names), 0, std::move(edges), Formula::top(),
                       std::move(d0), std::move(hidden));
    }

private:
    std::mt19937 rng_;
};

}  // namespace testutil
