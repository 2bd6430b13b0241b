#pragma once

// Internal engine shared by the formula and knowledge translation units.
// Not installed; include only from src/.

#include "spv/formula.hpp"
#include "spv/term.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace spv::internal {

/// Congruence closure over an interned term DAG with injective constructors,
/// plus adversary-derivability saturation over the congruence classes.
///
/// Sizes stay small (tens to low hundreds of nodes), so the engine favors a
/// simple recompute-to-fixpoint strategy over incremental data structures.
/// New terms may be interned after equalities are asserted: a fresh node can
/// only join an existing class (two old classes that were distinct stay
/// distinct), so previously computed answers remain valid and only the dirty
/// flags below force recomputation.
class TermGraph {
public:
    struct Node {
        Term term = Term::epsilon();
        Term::Kind kind = Term::Kind::Seq;
        std::string name;           // Const / Var
        bool is_key = false;        // Var
        std::vector<int> children;  // node ids; Enc: {key, body}, Seq: items
    };

    int intern(const Term& t) {
        auto it = ids_.find(t);
        if (it != ids_.end()) return it->second;
        Node n;
        n.term = t;
        n.kind = t.kind();
        switch (t.kind()) {
            case Term::Kind::Const:
            case Term::Kind::Var:
                n.name = t.name();
                n.is_key = t.is_key_var();
                break;
            case Term::Kind::Enc:
                n.children.push_back(intern(t.enc_key()));
                n.children.push_back(intern(t.enc_body()));
                break;
            case Term::Kind::Seq:
                for (const auto& item : t.items()) n.children.push_back(intern(item));
                break;
        }
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(std::move(n));
        parent_.push_back(id);
        ids_.emplace(t, id);
        mark_dirty();
        return id;
    }

    void assert_equal(const Term& a, const Term& b) {
        const int x = intern(a);
        const int y = intern(b);
        pending_.emplace_back(x, y);
        mark_dirty();
    }

    /// Asserts every equation of the formula; membership atoms contribute no
    /// equalities (they are handled by the callers that interpret them).
    void assert_equalities(const Formula& f) {
        for (const auto& atom : f.atoms()) {
            if (atom.kind() == Atom::Kind::Eq) assert_equal(atom.lhs(), atom.rhs());
        }
    }

    void disclose(const Term& t) {
        disclosed_.push_back(intern(t));
        deriv_dirty_ = true;
    }

    int find(int v) {
        while (parent_[v] != v) {
            parent_[v] = parent_[parent_[v]];
            v = parent_[v];
        }
        return v;
    }

    bool same(const Term& a, const Term& b) {
        const int x = intern(a);
        const int y = intern(b);
        ensure_congruence();
        return find(x) == find(y);
    }

    bool contradictory() {
        ensure_congruence();
        return contradiction_;
    }

    /// True if some congruence class identifies two of the given names, or a
    /// name with a constant, an encryption, or a sequence (the empty sequence
    /// included): the names are read as pairwise-distinct fresh atoms.
    bool names_clash(const std::set<std::string>& names) {
        ensure_congruence();
        for (const auto& [root, ms] : members_) {
            (void)root;
            std::set<std::string> here;
            bool structural = false;
            for (int m : ms) {
                const Node& n = nodes_[m];
                if (n.kind == Term::Kind::Var && names.count(n.name)) here.insert(n.name);
                if (n.kind == Term::Kind::Const || n.kind == Term::Kind::Enc ||
                    n.kind == Term::Kind::Seq) {
                    structural = true;
                }
            }
            if (here.size() >= 2) return true;
            if (!here.empty() && structural) return true;
        }
        return false;
    }

    bool derivable(const Term& t) {
        const int id = intern(t);
        return derivable_id(id);
    }

    bool derivable_id(int id) {
        ensure_deriv();
        if (contradiction_) return true;  // everything is equal under false
        std::set<int> in_progress;
        bool provisional = false;
        return derive_rec(find(id), in_progress, provisional);
    }

    const std::vector<int>& class_members(int root) {
        ensure_congruence();
        return members_[find(root)];
    }

    std::vector<int> available_roots() {
        ensure_deriv();
        return std::vector<int>(avail_.begin(), avail_.end());
    }

    /// Node ids of every interned encryption (used to replay candidate
    /// ciphertexts against input patterns).
    std::vector<int> enc_nodes() {
        ensure_congruence();
        std::vector<int> out;
        for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
            if (nodes_[i].kind == Term::Kind::Enc) out.push_back(i);
        }
        return out;
    }

    const Node& node(int id) const { return nodes_[id]; }

private:
    void mark_dirty() {
        cong_dirty_ = true;
        deriv_dirty_ = true;
    }

    void merge(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a > b) std::swap(a, b);  // keep the older node as root for stability
        parent_[b] = a;
    }

    bool congruent(const Node& a, const Node& b) {
        if (a.kind != b.kind) return false;
        switch (a.kind) {
            case Term::Kind::Const:
                return a.name == b.name;
            case Term::Kind::Var:
                return a.name == b.name && a.is_key == b.is_key;
            case Term::Kind::Enc:
            case Term::Kind::Seq:
                if (a.children.size() != b.children.size()) return false;
                for (std::size_t i = 0; i < a.children.size(); ++i) {
                    if (find(a.children[i]) != find(b.children[i])) return false;
                }
                return true;
        }
        return false;
    }

    void ensure_congruence() {
        if (!cong_dirty_) return;
        cong_dirty_ = false;
        for (auto [a, b] : pending_) merge(a, b);
        pending_.clear();

        bool changed = true;
        while (changed) {
            changed = false;
            const int n = static_cast<int>(nodes_.size());
            // Congruence: nodes with equal heads and pairwise-equal child
            // classes belong to one class.
            for (int i = 0; i < n; ++i) {
                for (int j = i + 1; j < n; ++j) {
                    if (find(i) == find(j)) continue;
                    if (congruent(nodes_[i], nodes_[j])) {
                        merge(i, j);
                        changed = true;
                    }
                }
            }
            rebuild_members();
            // Injectivity within each class.
            for (const auto& [root, ms] : members_) {
                (void)root;
                const Node* first_enc = nullptr;
                const Node* det_seq = nullptr;
                for (int m : ms) {
                    const Node& nd = nodes_[m];
                    if (nd.kind == Term::Kind::Enc) {
                        if (first_enc) {
                            if (find(first_enc->children[0]) != find(nd.children[0])) {
                                merge(first_enc->children[0], nd.children[0]);
                                changed = true;
                            }
                            if (find(first_enc->children[1]) != find(nd.children[1])) {
                                merge(first_enc->children[1], nd.children[1]);
                                changed = true;
                            }
                        } else {
                            first_enc = &nd;
                        }
                    } else if (nd.kind == Term::Kind::Seq) {
                        bool det = true;
                        for (int c : nd.children) {
                            if (nodes_[c].kind == Term::Kind::Var) det = false;
                        }
                        if (!det) continue;
                        if (det_seq) {
                            if (det_seq->children.size() != nd.children.size()) {
                                contradiction_ = true;
                            } else {
                                for (std::size_t i = 0; i < nd.children.size(); ++i) {
                                    if (find(det_seq->children[i]) != find(nd.children[i])) {
                                        merge(det_seq->children[i], nd.children[i]);
                                        changed = true;
                                    }
                                }
                            }
                        } else {
                            det_seq = &nd;
                        }
                    }
                }
            }
            if (changed) rebuild_members();
        }

        // Structural clashes.
        for (const auto& [root, ms] : members_) {
            (void)root;
            std::set<std::string> consts;
            bool has_enc = false;
            bool has_wide_seq = false;
            for (int m : ms) {
                const Node& nd = nodes_[m];
                if (nd.kind == Term::Kind::Const) consts.insert(nd.name);
                if (nd.kind == Term::Kind::Enc) has_enc = true;
                if (nd.kind == Term::Kind::Seq && nd.children.size() >= 2) has_wide_seq = true;
            }
            if (consts.size() >= 2) contradiction_ = true;
            if (!consts.empty() && (has_enc || has_wide_seq)) contradiction_ = true;
        }
    }

    void rebuild_members() {
        members_.clear();
        for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
            members_[find(i)].push_back(i);
        }
    }

    void ensure_deriv() {
        ensure_congruence();
        if (!deriv_dirty_) return;
        deriv_dirty_ = false;
        avail_.clear();
        memo_.clear();
        for (int d : disclosed_) avail_.insert(find(d));
        bool changed = true;
        while (changed) {
            changed = false;
            const std::vector<int> snapshot(avail_.begin(), avail_.end());
            for (int r : snapshot) {
                for (int m : members_[r]) {
                    const Node& nd = nodes_[m];
                    if (nd.kind == Term::Kind::Seq) {
                        for (int c : nd.children) changed |= avail_.insert(find(c)).second;
                    } else if (nd.kind == Term::Kind::Enc) {
                        if (avail_.count(find(nd.children[0]))) {
                            changed |= avail_.insert(find(nd.children[1])).second;
                        }
                    }
                }
            }
        }
    }

    // Synthesis: a class is derivable when it is available from the analysis,
    // or one of its structural members can be rebuilt from derivable parts.
    // Classes may be cyclic through their members (e.g. under x = k(x)), so a
    // class currently being expanded counts as underivable along that path
    // and negative answers that touched such a class are not memoized.
    bool derive_rec(int root, std::set<int>& in_progress, bool& provisional) {
        root = find(root);
        if (avail_.count(root)) return true;
        if (auto it = memo_.find(root); it != memo_.end()) return it->second;
        if (in_progress.count(root)) {
            provisional = true;
            return false;
        }
        in_progress.insert(root);
        bool ok = false;
        bool touched = false;
        for (int m : members_[root]) {
            const Node& nd = nodes_[m];
            if (nd.kind == Term::Kind::Seq) {
                if (nd.children.empty()) {  // the empty sequence costs nothing
                    ok = true;
                    break;
                }
                bool all = true;
                for (int c : nd.children) {
                    if (!derive_rec(c, in_progress, touched)) {
                        all = false;
                        break;
                    }
                }
                if (all) {
                    ok = true;
                    break;
                }
            } else if (nd.kind == Term::Kind::Enc) {
                if (derive_rec(nd.children[0], in_progress, touched) &&
                    derive_rec(nd.children[1], in_progress, touched)) {
                    ok = true;
                    break;
                }
            }
        }
        in_progress.erase(root);
        if (ok) {
            memo_[root] = true;
        } else if (!touched) {
            memo_[root] = false;
        } else {
            provisional = true;
        }
        return ok;
    }

    std::map<Term, int> ids_;
    std::vector<Node> nodes_;
    std::vector<int> parent_;
    std::vector<std::pair<int, int>> pending_;
    std::map<int, std::vector<int>> members_;
    std::vector<int> disclosed_;
    std::set<int> avail_;
    std::map<int, bool> memo_;
    bool cong_dirty_ = false;
    bool deriv_dirty_ = false;
    bool contradiction_ = false;
};

}  // namespace spv::internal
