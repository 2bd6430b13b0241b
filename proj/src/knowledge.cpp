#include "spv/knowledge.hpp"

#include "congruence.hpp"

#include <algorithm>
#include <sstream>
#include <utility>

namespace spv {

Frame::Frame(std::vector<Term> d, Formula b) : disclosed(std::move(d)), cond(std::move(b)) {
    std::sort(disclosed.begin(), disclosed.end());
    disclosed.erase(std::unique(disclosed.begin(), disclosed.end()), disclosed.end());
}

std::string Frame::str() const {
    std::ostringstream os;
    os << '{';
    bool first = true;
    for (const auto& t : disclosed) {
        if (!first) os << ", ";
        first = false;
        os << t;
    }
    os << "} under " << cond;
    return os.str();
}

struct ClosureOracle::Impl {
    internal::TermGraph graph;
};

ClosureOracle::ClosureOracle(Frame f) : frame_(std::move(f)), impl_(new Impl) {
    impl_->graph.assert_equalities(frame_.cond);
    for (const auto& t : frame_.disclosed) impl_->graph.disclose(t);
    false_ = impl_->graph.contradictory();
}

ClosureOracle::~ClosureOracle() = default;
ClosureOracle::ClosureOracle(ClosureOracle&&) noexcept = default;
ClosureOracle& ClosureOracle::operator=(ClosureOracle&&) noexcept = default;

bool ClosureOracle::contains(const Term& e) {
    if (false_) return true;
    return impl_->graph.derivable(e);
}

bool ClosureOracle::eq(const Term& a, const Term& b) {
    if (false_) return true;
    return impl_->graph.same(a, b);
}

bool ClosureOracle::eq_epsilon(const Term& e) { return eq(e, Term::epsilon()); }

std::optional<std::string> ClosureOracle::constant_of(const Term& e) {
    if (false_) return std::nullopt;  // no distinguishing constant under false
    auto& g = impl_->graph;
    const int id = g.intern(e);
    for (int m : g.class_members(g.find(id))) {
        if (g.node(m).kind == Term::Kind::Const) return g.node(m).name;
    }
    return std::nullopt;
}

std::vector<std::vector<Term>> ClosureOracle::seq_forms(const Term& e, std::size_t n) {
    auto& g = impl_->graph;
    const int id = g.intern(e);
    std::vector<std::vector<Term>> out;
    for (int m : g.class_members(g.find(id))) {
        const auto& node = g.node(m);
        if (node.kind != Term::Kind::Seq || node.children.size() != n) continue;
        bool all = true;
        std::vector<Term> items;
        for (int c : node.children) {
            if (!g.derivable_id(c)) {
                all = false;
                break;
            }
            items.push_back(g.node(c).term);
        }
        if (all && std::find(out.begin(), out.end(), items) == out.end()) {
            out.push_back(std::move(items));
        }
    }
    return out;
}

std::size_t ClosureOracle::max_seq_len(const Term& e) {
    auto& g = impl_->graph;
    const int id = g.intern(e);
    std::size_t best = 0;
    for (int m : g.class_members(g.find(id))) {
        const auto& node = g.node(m);
        if (node.kind == Term::Kind::Seq) best = std::max(best, node.children.size());
    }
    return best;
}

std::vector<std::pair<Term, Term>> ClosureOracle::enc_forms(const Term& e) {
    auto& g = impl_->graph;
    const int id = g.intern(e);
    std::vector<std::pair<Term, Term>> out;
    for (int m : g.class_members(g.find(id))) {
        const auto& node = g.node(m);
        if (node.kind != Term::Kind::Enc) continue;
        if (!g.derivable_id(node.children[0]) || !g.derivable_id(node.children[1])) continue;
        std::pair<Term, Term> form{g.node(node.children[0]).term, g.node(node.children[1]).term};
        if (std::find(out.begin(), out.end(), form) == out.end()) out.push_back(std::move(form));
    }
    return out;
}

std::vector<std::pair<Term, Term>> ClosureOracle::derivable_ciphertexts() {
    auto& g = impl_->graph;
    std::vector<std::pair<Term, Term>> out;
    for (int id : g.enc_nodes()) {
        if (!g.derivable_id(id)) continue;
        const auto& node = g.node(id);
        std::pair<Term, Term> form{g.node(node.children[0]).term, g.node(node.children[1]).term};
        if (std::find(out.begin(), out.end(), form) == out.end()) out.push_back(std::move(form));
    }
    return out;
}

bool closure_contains(const Frame& f, const Term& e) {
    ClosureOracle oracle(f);
    return oracle.contains(e);
}

std::vector<Term> analysis_saturate(const Frame& f) {
    internal::TermGraph g;
    g.assert_equalities(f.cond);
    for (const auto& t : f.disclosed) g.disclose(t);
    std::vector<Term> out;
    if (g.contradictory()) {
        out = f.disclosed;
    } else {
        for (int root : g.available_roots()) {
            for (int m : g.class_members(root)) out.push_back(g.node(m).term);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace {

struct SimilarityScan {
    ClosureOracle left;
    ClosureOracle right;

    explicit SimilarityScan(const Frame& l, const Frame& r) : left(l), right(r) {}

    bool paired(const std::vector<std::pair<Term, Term>>& pairs, const Term& a, const Term& b) {
        for (const auto& [p, q] : pairs) {
            if (left.eq(a, p) && right.eq(b, q)) return true;
        }
        return false;
    }

    // Choice-independent conditions; a violation can never be repaired by
    // adding pairs.
    bool violation(const std::vector<std::pair<Term, Term>>& pairs, std::string* why) {
        for (const auto& [e1, e2] : pairs) {
            if (!left.contains(e1) || !right.contains(e2)) {
                if (why) *why = "pair (" + e1.str() + ", " + e2.str() + ") lies outside a closure";
                return true;
            }
        }
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            for (std::size_t j = 0; j < pairs.size(); ++j) {
                const bool l = left.eq(pairs[i].first, pairs[j].first);
                const bool r = right.eq(pairs[i].second, pairs[j].second);
                if (l != r) {
                    if (why) {
                        *why = "condition-equality disagreement between (" + pairs[i].first.str() +
                               ", " + pairs[i].second.str() + ") and (" + pairs[j].first.str() +
                               ", " + pairs[j].second.str() + ")";
                    }
                    return true;
                }
            }
        }
        for (const auto& [e1, e2] : pairs) {
            if (left.eq_epsilon(e1) != right.eq_epsilon(e2)) {
                if (why) {
                    *why = "empty-sequence disagreement on (" + e1.str() + ", " + e2.str() + ")";
                }
                return true;
            }
            const auto c1 = left.constant_of(e1);
            const auto c2 = right.constant_of(e2);
            if (c1 != c2) {
                if (why) *why = "constant disagreement on (" + e1.str() + ", " + e2.str() + ")";
                return true;
            }
            const std::size_t width = std::max(left.max_seq_len(e1), right.max_seq_len(e2));
            for (std::size_t n = 2; n <= width; ++n) {
                if (left.seq_forms(e1, n).empty() != right.seq_forms(e2, n).empty()) {
                    if (why) {
                        *why = "sequence split of width " + std::to_string(n) +
                               " available on one side only for (" + e1.str() + ", " + e2.str() +
                               ")";
                    }
                    return true;
                }
            }
            if (left.enc_forms(e1).empty() != right.enc_forms(e2).empty()) {
                if (why) {
                    *why = "encryption split available on one side only for (" + e1.str() + ", " +
                           e2.str() + ")";
                }
                return true;
            }
        }
        return false;
    }

    // The alignments that could discharge the first unmet decomposition
    // obligation: each alternative is the set of pairs it would add. An empty
    // addition set means the obligation is already met.
    struct Obligation {
        std::string what;
        std::vector<std::vector<std::pair<Term, Term>>> alternatives;
    };

    std::optional<Obligation> first_unmet(const std::vector<std::pair<Term, Term>>& pairs) {
        for (const auto& [e1, e2] : pairs) {
            const std::size_t width = std::max(left.max_seq_len(e1), right.max_seq_len(e2));
            for (std::size_t n = 2; n <= width; ++n) {
                auto f1 = left.seq_forms(e1, n);
                auto f2 = right.seq_forms(e2, n);
                if (f1.empty() || f2.empty()) continue;
                auto ob = align_seq(pairs, f1, f2, n);
                if (ob) {
                    ob->what = "sequence split of (" + e1.str() + ", " + e2.str() + ") at width " +
                               std::to_string(n);
                    return ob;
                }
            }
            auto k1 = left.enc_forms(e1);
            auto k2 = right.enc_forms(e2);
            if (!k1.empty() && !k2.empty()) {
                auto ob = align_enc(pairs, k1, k2);
                if (ob) {
                    ob->what = "encryption split of (" + e1.str() + ", " + e2.str() + ")";
                    return ob;
                }
            }
        }
        return std::nullopt;
    }

private:
    std::optional<Obligation> align_seq(const std::vector<std::pair<Term, Term>>& pairs,
                                        const std::vector<std::vector<Term>>& f1,
                                        const std::vector<std::vector<Term>>& f2, std::size_t n) {
        Obligation ob;
        for (const auto& v1 : f1) {
            for (const auto& v2 : f2) {
                std::vector<std::pair<Term, Term>> missing;
                for (std::size_t j = 0; j < n; ++j) {
                    if (!paired(pairs, v1[j], v2[j])) missing.emplace_back(v1[j], v2[j]);
                }
                if (missing.empty()) return std::nullopt;  // already met
                ob.alternatives.push_back(std::move(missing));
            }
        }
        return ob;
    }

    std::optional<Obligation> align_enc(const std::vector<std::pair<Term, Term>>& pairs,
                                        const std::vector<std::pair<Term, Term>>& k1,
                                        const std::vector<std::pair<Term, Term>>& k2) {
        Obligation ob;
        for (const auto& [key1, body1] : k1) {
            for (const auto& [key2, body2] : k2) {
                std::vector<std::pair<Term, Term>> missing;
                if (!paired(pairs, key1, key2)) missing.emplace_back(key1, key2);
                if (!paired(pairs, body1, body2)) missing.emplace_back(body1, body2);
                if (missing.empty()) return std::nullopt;  // already met
                ob.alternatives.push_back(std::move(missing));
            }
        }
        return ob;
    }
};

constexpr std::size_t kMaxSimilarityPairs = 256;
constexpr int kMaxSimilarityDepth = 64;

bool saturate(SimilarityScan& scan, std::vector<std::pair<Term, Term>>& pairs, int depth) {
    if (depth > kMaxSimilarityDepth || pairs.size() > kMaxSimilarityPairs) return false;
    if (scan.violation(pairs, nullptr)) return false;
    auto ob = scan.first_unmet(pairs);
    if (!ob) return true;
    for (const auto& additions : ob->alternatives) {
        auto attempt = pairs;
        for (const auto& p : additions) {
            if (std::find(attempt.begin(), attempt.end(), p) == attempt.end()) attempt.push_back(p);
        }
        if (saturate(scan, attempt, depth + 1)) {
            pairs = std::move(attempt);
            return true;
        }
    }
    return false;
}

}  // namespace

bool check_similarity(const Similarity& s, std::string* why) {
    SimilarityScan scan(s.left, s.right);
    if (scan.violation(s.pairs, why)) return false;
    if (auto ob = scan.first_unmet(s.pairs)) {
        if (why) *why = "unmet decomposition obligation: " + ob->what;
        return false;
    }
    return true;
}

std::optional<Similarity> find_similarity(const Frame& left, const Frame& right,
                                          const std::vector<std::pair<Term, Term>>& seed) {
    SimilarityScan scan(left, right);
    std::vector<std::pair<Term, Term>> pairs;
    for (const auto& p : seed) {
        if (std::find(pairs.begin(), pairs.end(), p) == pairs.end()) pairs.push_back(p);
    }
    if (!saturate(scan, pairs, 0)) return std::nullopt;
    return Similarity{std::move(pairs), left, right};
}

namespace {

std::vector<Formula> match_rec(ClosureOracle& oracle, const Term& pattern) {
    switch (pattern.kind()) {
        case Term::Kind::Var:
            return {Formula::top()};
        case Term::Kind::Const:
            if (oracle.contains(pattern)) return {Formula::top()};
            return {};
        case Term::Kind::Seq: {
            std::vector<Formula> acc{Formula::top()};
            for (const auto& item : pattern.items()) {
                auto item_cands = match_rec(oracle, item);
                std::vector<Formula> next;
                for (const auto& a : acc) {
                    for (const auto& c : item_cands) next.push_back(conjoin(a, c));
                }
                acc = std::move(next);
                if (acc.empty()) break;
            }
            return acc;
        }
        case Term::Kind::Enc: {
            std::vector<Formula> out;
            for (const auto& [key, body] : oracle.derivable_ciphertexts()) {
                out.push_back(Formula::of(
                    {Atom::eq(pattern.enc_key(), key), Atom::eq(pattern.enc_body(), body)}));
            }
            if (oracle.contains(pattern.enc_key())) {
                for (auto& c : match_rec(oracle, pattern.enc_body())) out.push_back(std::move(c));
            }
            return out;
        }
    }
    return {};
}

}  // namespace

std::vector<Formula> match_candidates(const Frame& f, const Term& pattern,
                                      const std::set<std::string>& names) {
    if (is_false(f.cond)) return {Formula::top()};
    ClosureOracle oracle(f);
    std::vector<Formula> raw = match_rec(oracle, pattern);
    std::vector<Formula> out;
    for (auto& beta : raw) {
        if (!satisfiable_given_names(conjoin(f.cond, beta), names)) continue;
        bool dup = false;
        for (const auto& kept : out) {
            if (equivalent(kept, beta)) {
                dup = true;
                break;
            }
        }
        if (!dup) out.push_back(std::move(beta));
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace spv
