#include "spv/equivalence.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace spv {

namespace {

bool fail(std::string* why, const std::string& msg) {
    if (why) *why = msg;
    return false;
}

std::vector<std::pair<Term, Term>> sorted_pairs(std::vector<std::pair<Term, Term>> ps) {
    std::sort(ps.begin(), ps.end());
    ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
    return ps;
}

bool pair_subset(const std::vector<std::pair<Term, Term>>& small,
                 const std::vector<std::pair<Term, Term>>& big) {
    for (const auto& p : small)
        if (std::find(big.begin(), big.end(), p) == big.end()) return false;
    return true;
}

// Atoms of `first` that every formula in `all` entails (together with `base`);
// the strongest common consequence we track across branching contributions.
Formula common_atoms(const Formula& base, const std::vector<Formula>& all) {
    if (all.empty()) return Formula::top();
    std::vector<Atom> kept;
    for (const Atom& a : all.front().atoms()) {
        bool everywhere = true;
        for (const Formula& f : all) {
            if (!entails(conjoin(base, f), Formula::of({a}))) {
                everywhere = false;
                break;
            }
        }
        if (everywhere) kept.push_back(a);
    }
    return Formula::of(kept);
}

// What one transition hands to its target state, judged at the source's
// weakest condition (for feasibility along some execution) and strongest
// condition (for what the adversary could at most derive). A contribution is
// dead when no execution can take the edge.
struct Contribution {
    bool live = false;
    bool pattern_skipped = false;  // input pattern left out as redundant
    Term pattern = Term::epsilon();
    Formula weak_b = Formula::top();
    Formula strong_b = Formula::top();
    std::vector<Formula> betas;  // input match alternatives
    std::vector<Term> disclosed;
};

Contribution edge_contribution(const Frame& weak, const Formula& strong, const Action& a,
                               const std::set<std::string>& hidden) {
    Contribution c;
    switch (a.kind) {
        case Action::Kind::Internal: {
            Formula wb = conjoin(weak.cond, a.cond);
            if (!satisfiable_given_names(wb, hidden)) return c;
            c.live = true;
            c.weak_b = wb;
            c.strong_b = conjoin(strong, a.cond);
            c.disclosed = weak.disclosed;
            return c;
        }
        case Action::Kind::Output: {
            if (!closure_contains(Frame(weak.disclosed, strong), a.channel)) return c;
            c.live = true;
            c.weak_b = weak.cond;
            c.strong_b = strong;
            c.disclosed = weak.disclosed;
            c.disclosed.push_back(a.payload);
            return c;
        }
        case Action::Kind::Input: {
            if (!closure_contains(Frame(weak.disclosed, strong), a.channel)) return c;
            std::vector<Formula> cands = match_candidates(weak, a.payload, hidden);
            if (cands.empty()) return c;
            c.live = true;
            c.weak_b = conjoin(weak.cond, common_atoms(weak.cond, cands));
            Formula every = strong;
            for (const Formula& beta : cands) every = conjoin(every, beta);
            c.strong_b = every;
            c.betas = cands;
            c.disclosed = weak.disclosed;
            c.pattern = a.payload;
            bool redundant = false;
            for (const Term& d : weak.disclosed) {
                if (eq_under(c.weak_b, a.payload, d)) {
                    redundant = true;
                    break;
                }
            }
            if (redundant) {
                c.pattern_skipped = true;
            } else {
                c.disclosed.push_back(a.payload);
            }
            return c;
        }
    }
    return c;
}

struct Synth {
    StateLabeling weak;
    std::map<int, Formula> strong;
};

Synth synthesize_full(const Process& p) {
    Synth out;
    const std::set<std::string>& hidden = p.hidden();
    out.weak.entries.emplace(p.initial(), p.initial_frame());
    out.strong.emplace(p.initial(), p.init_cond());
    std::map<int, std::vector<Contribution>> incoming;
    for (int u : p.topo_order()) {
        if (u != p.initial()) {
            auto found = incoming.find(u);
            if (found == incoming.end() || found->second.empty()) continue;
            std::vector<Contribution>& contribs = found->second;
            std::vector<Term> d;
            std::vector<Formula> weaks;
            Formula strong = Formula::top();
            for (const Contribution& c : contribs) {
                d.insert(d.end(), c.disclosed.begin(), c.disclosed.end());
                weaks.push_back(c.weak_b);
                strong = conjoin(strong, c.strong_b);
            }
            std::vector<Atom> kept;
            for (const Atom& a : weaks.front().atoms()) {
                bool everywhere = true;
                for (const Formula& w : weaks) {
                    if (!entails(w, Formula::of({a}))) {
                        everywhere = false;
                        break;
                    }
                }
                if (everywhere) kept.push_back(a);
            }
            Formula bv = Formula::of(std::move(kept));
            // A pattern skipped as redundant on one way in need not stay
            // derivable under the combined (possibly weaker) condition; put it
            // back if any of that edge's match alternatives loses it.
            for (const Contribution& c : contribs) {
                if (!c.pattern_skipped) continue;
                for (const Formula& beta : c.betas) {
                    if (!closure_contains(Frame(d, conjoin(bv, beta)), c.pattern)) {
                        d.push_back(c.pattern);
                        break;
                    }
                }
            }
            out.weak.entries.emplace(u, Frame(std::move(d), std::move(bv)));
            out.strong.emplace(u, strong);
        }
        auto lab = out.weak.entries.find(u);
        if (lab == out.weak.entries.end()) continue;
        const Formula& strong_u = out.strong.at(u);
        for (int idx : p.outgoing(u)) {
            const Transition& t = p.transitions()[idx];
            Contribution c = edge_contribution(lab->second, strong_u, t.act, hidden);
            if (c.live) incoming[t.to].push_back(std::move(c));
        }
    }
    return out;
}

// True when some execution arriving with the source's label can take the
// edge; edges failing this are unobservable and vacuous everywhere.
bool edge_live(const Frame& at, const Action& a, const std::set<std::string>& hidden) {
    switch (a.kind) {
        case Action::Kind::Internal:
            return satisfiable_given_names(conjoin(at.cond, a.cond), hidden);
        case Action::Kind::Output:
            return closure_contains(at, a.channel);
        case Action::Kind::Input:
            return closure_contains(at, a.channel) &&
                   !match_candidates(at, a.payload, hidden).empty();
    }
    return false;
}

}  // namespace

StateLabeling synthesize_labeling(const Process& p) { return synthesize_full(p).weak; }

bool check_labeling(const Process& p, const StateLabeling& l, std::string* why) {
    for (const auto& [s, f] : l.entries) {
        (void)f;
        if (s < 0 || s >= p.state_count()) return fail(why, "labeled state out of range");
    }
    auto init = l.entries.find(p.initial());
    if (init == l.entries.end()) return fail(why, "initial state is not labeled");
    Frame f0 = p.initial_frame();
    if (!equivalent(init->second.cond, f0.cond) || init->second.disclosed != f0.disclosed)
        return fail(why, "initial label differs from the process's (cond, disclosed)");

    for (const Transition& t : p.transitions()) {
        auto iu = l.entries.find(t.from);
        auto iv = l.entries.find(t.to);
        if (iu == l.entries.end() || iv == l.entries.end()) continue;
        const Frame& fu = iu->second;
        const Frame& fv = iv->second;
        const std::string where =
            p.state_name(t.from) + " -[" + t.act.str() + "]-> " + p.state_name(t.to);
        switch (t.act.kind) {
            case Action::Kind::Internal: {
                Formula b = conjoin(fu.cond, t.act.cond);
                if (!satisfiable_given_names(b, p.hidden())) break;
                if (!entails(b, fv.cond))
                    return fail(why, where + ": condition does not entail the target condition");
                if (!std::includes(fv.disclosed.begin(), fv.disclosed.end(),
                                   fu.disclosed.begin(), fu.disclosed.end()))
                    return fail(why, where + ": disclosed terms not carried to the target");
                break;
            }
            case Action::Kind::Output: {
                ClosureOracle at(fu);
                if (!at.contains(t.act.channel)) break;
                if (!entails(fu.cond, fv.cond))
                    return fail(why, where + ": condition does not entail the target condition");
                ClosureOracle tgt(fv);
                for (const Term& d : fu.disclosed)
                    if (!tgt.contains(d))
                        return fail(why, where + ": disclosed term " + d.str() +
                                             " missing from the target closure");
                if (!tgt.contains(t.act.payload))
                    return fail(why, where + ": sent message not in the target closure");
                break;
            }
            case Action::Kind::Input: {
                ClosureOracle at(fu);
                if (!at.contains(t.act.channel)) break;
                std::vector<Formula> cands = match_candidates(fu, t.act.payload, p.hidden());
                if (cands.empty()) break;
                for (const Formula& beta : cands) {
                    if (!entails(conjoin(fu.cond, beta), fv.cond))
                        return fail(why, where + ": condition does not entail the target " +
                                             "condition under match " + beta.str());
                    ClosureOracle tgt(Frame(fv.disclosed, conjoin(fv.cond, beta)));
                    for (const Term& d : fu.disclosed)
                        if (!tgt.contains(d))
                            return fail(why, where + ": disclosed term " + d.str() +
                                                 " missing from the target closure");
                    if (!tgt.contains(t.act.payload))
                        return fail(why, where + ": received pattern not in the target closure");
                }
                break;
            }
        }
    }
    return true;
}

std::pair<Process, ReductionPass> reduce_pass(const Process& p, const StateLabeling& scope,
                                              ReduceMode mode) {
    ReductionPass rec;
    Synth syn = synthesize_full(p);
    const std::set<std::string>& hidden = p.hidden();
    const std::vector<Transition>& trs = p.transitions();
    std::vector<char> drop(trs.size(), 0);

    for (std::size_t i = 0; i < trs.size(); ++i) {
        const Transition& t = trs[i];
        auto is = scope.entries.find(t.from);
        if (is == scope.entries.end()) continue;
        const Frame& w = is->second;
        Formula strong = w.cond;
        if (auto st = syn.strong.find(t.from); st != syn.strong.end())
            strong = conjoin(strong, st->second);
        Formula judged = (mode == ReduceMode::ConditionFree) ? Formula::top() : w.cond;
        switch (t.act.kind) {
            case Action::Kind::Internal:
                if (!satisfiable_given_names(conjoin(judged, t.act.cond), hidden)) {
                    drop[i] = 1;
                    rec.dropped_internal.push_back(
                        {p.state_name(t.from), t.act, p.state_name(t.to)});
                }
                break;
            case Action::Kind::Output:
                if (!closure_contains(Frame(w.disclosed, strong), t.act.channel)) {
                    drop[i] = 1;
                    rec.removed.push_back({p.state_name(t.from), t.act, p.state_name(t.to),
                                           Frame(w.disclosed, w.cond)});
                }
                break;
            case Action::Kind::Input: {
                bool out = false;
                if (!closure_contains(Frame(w.disclosed, strong), t.act.channel)) {
                    out = true;
                } else if (match_candidates(Frame(w.disclosed, judged), t.act.payload, hidden)
                               .empty()) {
                    // No message the adversary can build matches the pattern;
                    // in the staged (condition-free) mode only remove what the
                    // full rule would remove as well.
                    out = mode == ReduceMode::Full ||
                          match_candidates(w, t.act.payload, hidden).empty();
                }
                if (out) {
                    drop[i] = 1;
                    rec.removed.push_back({p.state_name(t.from), t.act, p.state_name(t.to),
                                           Frame(w.disclosed, w.cond)});
                }
                break;
            }
        }
    }

    // Delete everything no longer reachable from the initial state.
    std::vector<char> reach(p.state_count(), 0);
    std::vector<int> stack{p.initial()};
    reach[p.initial()] = 1;
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int idx : p.outgoing(u)) {
            if (drop[idx]) continue;
            int v = trs[idx].to;
            if (!reach[v]) {
                reach[v] = 1;
                stack.push_back(v);
            }
        }
    }
    for (int s = 0; s < p.state_count(); ++s)
        if (!reach[s]) rec.pruned_states.push_back(p.state_name(s));
    for (std::size_t i = 0; i < trs.size(); ++i)
        if (!drop[i] && !reach[trs[i].from])
            rec.pruned_edges.push_back(
                {p.state_name(trs[i].from), trs[i].act, p.state_name(trs[i].to)});

    std::vector<int> newid(p.state_count(), -1);
    std::vector<std::string> names;
    for (int s = 0; s < p.state_count(); ++s) {
        if (reach[s]) {
            newid[s] = static_cast<int>(names.size());
            names.push_back(p.state_name(s));
        }
    }
    std::vector<Transition> kept;
    for (std::size_t i = 0; i < trs.size(); ++i)
        if (!drop[i] && reach[trs[i].from])
            kept.push_back({newid[trs[i].from], trs[i].act, newid[trs[i].to]});
    Process out(std::move(names), newid[p.initial()], std::move(kept), p.init_cond(),
                p.disclosed(), p.hidden());
    return {std::move(out), std::move(rec)};
}

Process reduce(const Process& p, const StateLabeling& l) {
    auto [cur, rec] = reduce_pass(p, l, ReduceMode::Full);
    while (rec.changed()) {
        StateLabeling syn = synthesize_labeling(cur);
        auto next = reduce_pass(cur, syn, ReduceMode::Full);
        cur = std::move(next.first);
        rec = std::move(next.second);
    }
    return cur;
}

namespace {

// State ids reachable from s through feasible internal transitions between
// labeled states, s included; ascending.
std::vector<int> tau_closure(const Process& p, const StateLabeling& l, int s,
                             const std::set<std::string>& hidden) {
    std::vector<int> out;
    std::set<int> seen{s};
    std::vector<int> stack{s};
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        out.push_back(u);
        for (int idx : p.outgoing(u)) {
            const Transition& t = p.transitions()[idx];
            if (t.act.kind != Action::Kind::Internal) continue;
            if (!l.has(t.to)) continue;
            if (!satisfiable_given_names(conjoin(l.at(u).cond, t.act.cond), hidden)) continue;
            if (seen.insert(t.to).second) stack.push_back(t.to);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool channel_paired(const std::vector<std::pair<Term, Term>>& mu0, const Formula& bl,
                    const Term& dl, const Formula& br, const Term& dr) {
    for (const auto& [x, y] : mu0) {
        (void)y;
        if (eq_under(bl, dl, x) && eq_under(br, dr, x)) return true;
    }
    return false;
}

}  // namespace

bool check_witness(const Process& p1, const Process& p2, const EquivalenceWitness& w,
                   std::string* why) {
    std::string sub;
    if (!check_labeling(p1, w.labeling_left, &sub))
        return fail(why, "left labeling: " + sub);
    if (!check_labeling(p2, w.labeling_right, &sub))
        return fail(why, "right labeling: " + sub);

    std::set<std::pair<int, int>> rel(w.relation.begin(), w.relation.end());
    if (!rel.count({p1.initial(), p2.initial()}))
        return fail(why, "initial state pair is not in the relation");
    for (const auto& pr : rel) {
        if (!w.labeling_left.has(pr.first) || !w.labeling_right.has(pr.second))
            return fail(why, "related pair (" + p1.state_name(pr.first) + ", " +
                                 p2.state_name(pr.second) + ") has an unlabeled state");
        if (!w.similarities.count(pr))
            return fail(why, "related pair (" + p1.state_name(pr.first) + ", " +
                                 p2.state_name(pr.second) + ") has no similarity");
    }
    if (w.similarities.size() != rel.size())
        return fail(why, "similarity map does not match the relation");

    // mu0 must be the initial pair's similarity: an identity on terms
    // disclosed by both processes.
    const std::vector<Term>& d1 = p1.disclosed();
    const std::vector<Term>& d2 = p2.disclosed();
    for (const auto& [x, y] : w.mu0) {
        if (!(x == y)) return fail(why, "mu0 pair (" + x.str() + ", " + y.str() + ") is not an identity pair");
        if (std::find(d1.begin(), d1.end(), x) == d1.end() ||
            std::find(d2.begin(), d2.end(), x) == d2.end())
            return fail(why, "mu0 term " + x.str() + " is not disclosed by both processes");
    }
    if (sorted_pairs(w.mu0) !=
        sorted_pairs(w.similarities.at({p1.initial(), p2.initial()}).pairs))
        return fail(why, "mu0 differs from the initial pair's similarity");

    for (const auto& [pr, sim] : w.similarities) {
        if (!rel.count(pr)) return fail(why, "similarity for a pair outside the relation");
        if (!(sim.left == w.labeling_left.at(pr.first)) ||
            !(sim.right == w.labeling_right.at(pr.second)))
            return fail(why, "similarity frames of (" + p1.state_name(pr.first) + ", " +
                                 p2.state_name(pr.second) + ") differ from the labeled frames");
        if (!check_similarity(sim, &sub))
            return fail(why, "similarity of (" + p1.state_name(pr.first) + ", " +
                                 p2.state_name(pr.second) + "): " + sub);
    }

    // One direction of the mutual simulation; mirrored below.
    auto simulate = [&](const Process& pa, const Process& pb, const StateLabeling& la,
                        const StateLabeling& lb, bool flipped) -> bool {
        for (const auto& pr : rel) {
            int sa = flipped ? pr.second : pr.first;
            int sb = flipped ? pr.first : pr.second;
            const auto mu_of = [&](int a, int b) -> const std::vector<std::pair<Term, Term>>& {
                return w.similarities.at(flipped ? std::make_pair(b, a) : std::make_pair(a, b))
                    .pairs;
            };
            const std::vector<std::pair<Term, Term>>& mu = mu_of(sa, sb);
            for (int idx : pa.outgoing(sa)) {
                const Transition& t = pa.transitions()[idx];
                if (!la.has(t.to)) {
                    if (edge_live(la.at(sa), t.act, pa.hidden()))
                        return fail(why, pa.state_name(sa) + " -[" + t.act.str() +
                                             "]->: feasible step into an unlabeled state");
                    continue;
                }
                if (!edge_live(la.at(sa), t.act, pa.hidden())) continue;
                bool ok = false;
                if (t.act.kind == Action::Kind::Internal) {
                    for (int rb : tau_closure(pb, lb, sb, pb.hidden())) {
                        auto succ = flipped ? std::make_pair(rb, t.to) : std::make_pair(t.to, rb);
                        if (!rel.count(succ)) continue;
                        if (!pair_subset(mu, mu_of(t.to, rb))) continue;
                        ok = true;
                        break;
                    }
                } else {
                    for (int tb : tau_closure(pb, lb, sb, pb.hidden())) {
                        if (ok) break;
                        for (int jdx : pb.outgoing(tb)) {
                            if (ok) break;
                            const Transition& u = pb.transitions()[jdx];
                            if (u.act.kind != t.act.kind) continue;
                            if (!lb.has(u.to)) continue;
                            if (!edge_live(lb.at(tb), u.act, pb.hidden())) continue;
                            bool chan = flipped
                                            ? channel_paired(w.mu0, lb.at(tb).cond, u.act.channel,
                                                             la.at(sa).cond, t.act.channel)
                                            : channel_paired(w.mu0, la.at(sa).cond, t.act.channel,
                                                             lb.at(tb).cond, u.act.channel);
                            if (!chan) continue;
                            for (int rb : tau_closure(pb, lb, u.to, pb.hidden())) {
                                auto succ = flipped ? std::make_pair(rb, t.to)
                                                    : std::make_pair(t.to, rb);
                                if (!rel.count(succ)) continue;
                                const auto& msucc = mu_of(t.to, rb);
                                if (!pair_subset(mu, msucc)) continue;
                                bool paired = false;
                                const Formula& ba = la.at(t.to).cond;
                                const Formula& bb = lb.at(rb).cond;
                                for (const auto& [ea, eb] : msucc) {
                                    const Term& mine = flipped ? eb : ea;
                                    const Term& theirs = flipped ? ea : eb;
                                    if (eq_under(ba, t.act.payload, mine) &&
                                        eq_under(bb, u.act.payload, theirs)) {
                                        paired = true;
                                        break;
                                    }
                                }
                                if (paired) {
                                    ok = true;
                                    break;
                                }
                            }
                        }
                    }
                }
                if (!ok)
                    return fail(why, pa.state_name(sa) + " -[" + t.act.str() +
                                         "]-> " + pa.state_name(t.to) +
                                         ": no simulating step on the other side");
            }
        }
        return true;
    };

    if (!simulate(p1, p2, w.labeling_left, w.labeling_right, false)) return false;
    if (!simulate(p2, p1, w.labeling_right, w.labeling_left, true)) return false;
    return true;
}

namespace {

struct WitnessSearch {
    const Process& p1;
    const Process& p2;
    const StateLabeling& labL;
    const StateLabeling& labR;
    std::vector<std::vector<int>> tauL, tauR;
    std::vector<char> liveL, liveR;
    std::vector<char> cand;
    std::vector<std::pair<Term, Term>> mu0;
    std::set<Term> common;
    std::uint64_t budget;
    std::uint64_t explored = 0;
    bool exhausted = false;

    using Mu = std::map<std::pair<int, int>, std::vector<std::pair<Term, Term>>>;

    WitnessSearch(const Process& a, const Process& b, const StateLabeling& la,
                  const StateLabeling& lb, std::uint64_t budget_)
        : p1(a), p2(b), labL(la), labR(lb), budget(budget_) {
        tauL.resize(p1.state_count());
        tauR.resize(p2.state_count());
        for (const auto& [s, f] : labL.entries) {
            (void)f;
            tauL[s] = tau_closure(p1, labL, s, p1.hidden());
        }
        for (const auto& [s, f] : labR.entries) {
            (void)f;
            tauR[s] = tau_closure(p2, labR, s, p2.hidden());
        }
        liveL.resize(p1.transitions().size(), 0);
        for (std::size_t i = 0; i < p1.transitions().size(); ++i) {
            const Transition& t = p1.transitions()[i];
            liveL[i] = labL.has(t.from) && labL.has(t.to) &&
                       edge_live(labL.at(t.from), t.act, p1.hidden());
        }
        liveR.resize(p2.transitions().size(), 0);
        for (std::size_t i = 0; i < p2.transitions().size(); ++i) {
            const Transition& t = p2.transitions()[i];
            liveR[i] = labR.has(t.from) && labR.has(t.to) &&
                       edge_live(labR.at(t.from), t.act, p2.hidden());
        }
    }

    // Structural prefilter: the greatest relation on labeled state pairs in
    // which every live edge on either side has at least one counterpart move
    // (matching kind, paired channels, targets again related), ignoring the
    // similarity side conditions. Every relation a valid witness can use is
    // contained in it, so pairs outside can be rejected without search. This
    // keeps one locally plausible but hopeless pair from being rediscovered
    // in every branch of the backtracking.
    bool candidate(int a, int b) const {
        return cand[static_cast<std::size_t>(a) * p2.state_count() + b] != 0;
    }

    void refine_candidates() {
        cand.assign(static_cast<std::size_t>(p1.state_count()) * p2.state_count(), 0);
        for (const auto& [a, fa] : labL.entries) {
            (void)fa;
            for (const auto& [b, fb] : labR.entries) {
                (void)fb;
                cand[static_cast<std::size_t>(a) * p2.state_count() + b] = 1;
            }
        }
        // Mirrors the counterpart enumeration in satisfy().
        auto answered = [&](bool left, int sa, int sb, const Transition& t) {
            const Process& pb = left ? p2 : p1;
            const StateLabeling& la = left ? labL : labR;
            const StateLabeling& lb = left ? labR : labL;
            const auto& taus = left ? tauR : tauL;
            const auto& liveB = left ? liveR : liveL;
            auto still = [&](int rb) {
                return left ? candidate(t.to, rb) : candidate(rb, t.to);
            };
            if (t.act.kind == Action::Kind::Internal) {
                for (int rb : taus[sb])
                    if (still(rb)) return true;
                return false;
            }
            for (int tb : taus[sb]) {
                for (int jdx : pb.outgoing(tb)) {
                    if (!liveB[jdx]) continue;
                    const Transition& u = pb.transitions()[jdx];
                    if (u.act.kind != t.act.kind) continue;
                    bool chan = left ? channel_paired(mu0, la.at(sa).cond, t.act.channel,
                                                      lb.at(tb).cond, u.act.channel)
                                     : channel_paired(mu0, lb.at(tb).cond, u.act.channel,
                                                      la.at(sa).cond, t.act.channel);
                    if (!chan) continue;
                    for (int rb : taus[u.to])
                        if (still(rb)) return true;
                }
            }
            return false;
        };
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& [a, fa] : labL.entries) {
                (void)fa;
                for (const auto& [b, fb] : labR.entries) {
                    (void)fb;
                    if (!candidate(a, b)) continue;
                    bool ok = true;
                    for (int idx : p1.outgoing(a))
                        if (liveL[idx] && !answered(true, a, b, p1.transitions()[idx])) {
                            ok = false;
                            break;
                        }
                    if (ok)
                        for (int idx : p2.outgoing(b))
                            if (liveR[idx] && !answered(false, b, a, p2.transitions()[idx])) {
                                ok = false;
                                break;
                            }
                    if (!ok) {
                        cand[static_cast<std::size_t>(a) * p2.state_count() + b] = 0;
                        changed = true;
                    }
                }
            }
        }
    }

    bool tick() {
        if (budget == 0) {
            exhausted = true;
            return false;
        }
        --budget;
        ++explored;
        return true;
    }

    std::optional<Mu> extend(Mu mu, std::pair<int, int> pr,
                             std::vector<std::pair<Term, Term>> seed,
                             std::set<std::pair<int, int>>* dirty) {
        if (!labL.has(pr.first) || !labR.has(pr.second)) return std::nullopt;
        if (!candidate(pr.first, pr.second)) return std::nullopt;
        auto cur = mu.find(pr);
        if (cur != mu.end())
            seed.insert(seed.end(), cur->second.begin(), cur->second.end());
        seed = sorted_pairs(std::move(seed));
        if (cur != mu.end() && seed == cur->second) return mu;
        auto sim = find_similarity(labL.at(pr.first), labR.at(pr.second), seed);
        if (!sim) return std::nullopt;
        std::vector<std::pair<Term, Term>> pairs = sorted_pairs(sim->pairs);
        if (cur == mu.end() || pairs != cur->second) {
            mu[pr] = std::move(pairs);
            dirty->insert(pr);
        }
        return mu;
    }

    std::optional<Mu> solve(Mu mu, std::set<std::pair<int, int>> dirty) {
        if (exhausted) return std::nullopt;
        if (dirty.empty()) return mu;
        auto pr = *dirty.begin();
        dirty.erase(dirty.begin());
        struct Ob {
            bool left;
            int edge;
        };
        std::vector<Ob> obs;
        for (int idx : p1.outgoing(pr.first))
            if (liveL[idx]) obs.push_back({true, idx});
        for (int idx : p2.outgoing(pr.second))
            if (liveR[idx]) obs.push_back({false, idx});
        return satisfy(std::move(mu), std::move(dirty), pr, obs, 0);
    }

    template <typename Obs>
    std::optional<Mu> satisfy(Mu mu, std::set<std::pair<int, int>> dirty,
                              std::pair<int, int> pr, const Obs& obs, std::size_t k) {
        if (exhausted) return std::nullopt;
        if (k == obs.size()) return solve(std::move(mu), std::move(dirty));
        const bool left = obs[k].left;
        const Process& pa = left ? p1 : p2;
        const Process& pb = left ? p2 : p1;
        const StateLabeling& la = left ? labL : labR;
        const StateLabeling& lb = left ? labR : labL;
        const auto& taus = left ? tauR : tauL;
        const auto& liveB = left ? liveR : liveL;
        const Transition& t = pa.transitions()[obs[k].edge];
        int sa = left ? pr.first : pr.second;
        int sb = left ? pr.second : pr.first;
        const std::vector<std::pair<Term, Term>>& muPr = mu.at(pr);

        auto try_target = [&](int rb, std::vector<std::pair<Term, Term>> seed)
            -> std::optional<Mu> {
            if (!tick()) return std::nullopt;
            std::pair<int, int> succ = left ? std::make_pair(t.to, rb)
                                            : std::make_pair(rb, t.to);
            std::set<std::pair<int, int>> delta;
            auto mu2 = extend(mu, succ, std::move(seed), &delta);
            if (!mu2) return std::nullopt;
            auto dirty2 = dirty;
            dirty2.insert(delta.begin(), delta.end());
            return satisfy(std::move(*mu2), std::move(dirty2), pr, obs, k + 1);
        };

        if (t.act.kind == Action::Kind::Internal) {
            for (int rb : taus[sb]) {
                auto r = try_target(rb, muPr);
                if (r) return r;
                if (exhausted) return std::nullopt;
            }
            return std::nullopt;
        }
        for (int tb : taus[sb]) {
            for (int jdx : pb.outgoing(tb)) {
                if (!liveB[jdx]) continue;
                const Transition& u = pb.transitions()[jdx];
                if (u.act.kind != t.act.kind) continue;
                bool chan = left ? channel_paired(mu0, la.at(sa).cond, t.act.channel,
                                                  lb.at(tb).cond, u.act.channel)
                                 : channel_paired(mu0, lb.at(tb).cond, u.act.channel,
                                                  la.at(sa).cond, t.act.channel);
                if (!chan) continue;
                for (int rb : taus[u.to]) {
                    std::vector<std::pair<Term, Term>> seed = muPr;
                    seed.push_back(left ? std::make_pair(t.act.payload, u.act.payload)
                                        : std::make_pair(u.act.payload, t.act.payload));
                    auto r = try_target(rb, std::move(seed));
                    if (r) return r;
                    if (exhausted) return std::nullopt;
                }
            }
        }
        return std::nullopt;
    }

    std::optional<Mu> run() {
        refine_candidates();  // needs mu0, so not done at construction
        Mu mu;
        std::set<std::pair<int, int>> dirty;
        std::pair<int, int> root{p1.initial(), p2.initial()};
        auto seeded = extend(std::move(mu), root, mu0, &dirty);
        if (!seeded) return std::nullopt;
        for (const auto& [a, b] : seeded->at(root))
            if (!(a == b) || !common.count(a)) return std::nullopt;
        return solve(std::move(*seeded), std::move(dirty));
    }
};

}  // namespace

SearchResult search_witness(const Process& p1, const Process& p2, std::uint64_t budget) {
    SearchResult res;
    StateLabeling labL = synthesize_labeling(p1);
    StateLabeling labR = synthesize_labeling(p2);

    std::set<Term> common;
    for (const Term& d : p1.disclosed())
        if (std::find(p2.disclosed().begin(), p2.disclosed().end(), d) != p2.disclosed().end())
            common.insert(d);
    std::set<Term> channels;
    for (const Transition& t : p1.transitions())
        if (t.act.is_message() && common.count(t.act.channel)) channels.insert(t.act.channel);
    for (const Transition& t : p2.transitions())
        if (t.act.is_message() && common.count(t.act.channel)) channels.insert(t.act.channel);

    std::vector<std::vector<std::pair<Term, Term>>> seeds;
    std::vector<std::pair<Term, Term>> full, chan;
    for (const Term& x : common) full.emplace_back(x, x);
    for (const Term& x : channels) chan.emplace_back(x, x);
    seeds.push_back(full);
    if (chan != full) seeds.push_back(chan);

    bool exhausted = false;
    for (const auto& mu0 : seeds) {
        WitnessSearch ws(p1, p2, labL, labR, budget);
        ws.mu0 = mu0;
        ws.common = common;
        auto mu = ws.run();
        res.explored += ws.explored;
        if (ws.exhausted) exhausted = true;
        if (!mu) continue;
        EquivalenceWitness w;
        w.labeling_left = labL;
        w.labeling_right = labR;
        for (const auto& [pr, pairs] : *mu) {
            w.relation.push_back(pr);
            w.similarities.emplace(
                pr, Similarity{pairs, labL.at(pr.first), labR.at(pr.second)});
        }
        std::sort(w.relation.begin(), w.relation.end());
        w.mu0 = mu->at({p1.initial(), p2.initial()});
        if (!check_witness(p1, p2, w)) continue;
        res.outcome = SearchOutcome::Found;
        res.witness = std::move(w);
        return res;
    }
    res.outcome = exhausted ? SearchOutcome::BudgetExhausted : SearchOutcome::NoWitnessFound;
    return res;
}

namespace {

struct TreeMatch {
    std::vector<std::pair<Term, Term>> mu0;
    std::set<Term> common;
    std::uint64_t budget;
    bool exhausted = false;
    std::map<const ExecNode*, int> ids;
    std::map<const ExecNode*, std::vector<const ExecNode*>> taus;
    std::map<std::string, bool> memo;
    std::string first_fail;

    int id(const ExecNode* n) {
        auto it = ids.find(n);
        if (it != ids.end()) return it->second;
        int v = static_cast<int>(ids.size());
        ids.emplace(n, v);
        return v;
    }

    const std::vector<const ExecNode*>& taunodes(const ExecNode* n) {
        auto it = taus.find(n);
        if (it != taus.end()) return it->second;
        std::vector<const ExecNode*> out{n};
        for (const auto& [a, child] : n->children) {
            if (a.kind != Action::Kind::Internal) continue;
            const auto& sub = taunodes(child.get());
            out.insert(out.end(), sub.begin(), sub.end());
        }
        return taus.emplace(n, std::move(out)).first->second;
    }

    bool tick() {
        if (budget == 0) {
            exhausted = true;
            return false;
        }
        --budget;
        return true;
    }

    std::string key(const ExecNode* n1, const ExecNode* n2,
                    const std::vector<std::pair<Term, Term>>& pairs) {
        std::ostringstream os;
        os << id(n1) << ',' << id(n2) << '|';
        for (const auto& [a, b] : pairs) os << a.str() << '~' << b.str() << ';';
        return os.str();
    }

    void note_fail(const ExecNode* n, const Action& a) {
        if (first_fail.empty())
            first_fail = "no counterpart for " + a.str() + " from state " +
                         std::to_string(n->state);
    }

    bool match(const ExecNode* n1, const ExecNode* n2,
               std::vector<std::pair<Term, Term>> seed, bool root) {
        if (!tick()) return false;
        auto sim = find_similarity(n1->frame, n2->frame, seed);
        if (!sim) return false;
        std::vector<std::pair<Term, Term>> pairs = sorted_pairs(sim->pairs);
        if (root) {
            for (const auto& [a, b] : pairs)
                if (!(a == b) || !common.count(a)) return false;
        }
        const std::string k = key(n1, n2, pairs);
        if (auto it = memo.find(k); it != memo.end()) return it->second;

        auto side = [&](const ExecNode* na, const ExecNode* nb, bool flipped) -> bool {
            for (const auto& [a, child] : na->children) {
                bool ok = false;
                if (a.kind == Action::Kind::Internal) {
                    for (const ExecNode* m : taunodes(nb)) {
                        if (flipped ? match(m, child.get(), pairs, false)
                                    : match(child.get(), m, pairs, false)) {
                            ok = true;
                            break;
                        }
                        if (exhausted) return false;
                    }
                } else {
                    for (const ExecNode* t : taunodes(nb)) {
                        if (ok) break;
                        for (const auto& [b, other] : t->children) {
                            if (b.kind != a.kind) continue;
                            bool chan = flipped ? channel_paired(mu0, t->frame.cond, b.channel,
                                                                 na->frame.cond, a.channel)
                                                : channel_paired(mu0, na->frame.cond, a.channel,
                                                                 t->frame.cond, b.channel);
                            if (!chan) continue;
                            for (const ExecNode* m : taunodes(other.get())) {
                                std::vector<std::pair<Term, Term>> seed2 = pairs;
                                seed2.push_back(flipped
                                                    ? std::make_pair(b.payload, a.payload)
                                                    : std::make_pair(a.payload, b.payload));
                                if (flipped ? match(m, child.get(), std::move(seed2), false)
                                            : match(child.get(), m, std::move(seed2), false)) {
                                    ok = true;
                                    break;
                                }
                                if (exhausted) return false;
                            }
                            if (ok) break;
                        }
                    }
                }
                if (!ok) {
                    note_fail(na, a);
                    return false;
                }
            }
            return true;
        };

        bool res = side(n1, n2, false) && !exhausted && side(n2, n1, true) && !exhausted;
        if (!exhausted) memo.emplace(k, res);
        return res;
    }
};

}  // namespace

Tri tree_equiv(const Process& p1, const Process& p2, std::uint64_t budget,
               std::string* evidence) {
    std::unique_ptr<ExecNode> t1 = exec_tree(p1);
    std::unique_ptr<ExecNode> t2 = exec_tree(p2);

    std::vector<Term> common;
    for (const Term& d : p1.disclosed())
        if (std::find(p2.disclosed().begin(), p2.disclosed().end(), d) != p2.disclosed().end())
            common.push_back(d);
    std::sort(common.begin(), common.end());
    common.erase(std::unique(common.begin(), common.end()), common.end());

    std::set<Term> channels;
    for (const Transition& t : p1.transitions())
        if (t.act.is_message()) channels.insert(t.act.channel);
    for (const Transition& t : p2.transitions())
        if (t.act.is_message()) channels.insert(t.act.channel);

    // Candidate identity seeds for the root similarity, strongest first. The
    // seed universe is finite (subsets of the common disclosed terms), so the
    // enumeration is exhaustive when the universe is small and the verdict
    // "not equivalent" is definite.
    std::vector<std::uint64_t> masks;
    std::uint64_t fullMask = (common.size() >= 64) ? ~std::uint64_t{0}
                                                   : ((std::uint64_t{1} << common.size()) - 1);
    std::uint64_t chanMask = 0;
    for (std::size_t i = 0; i < common.size(); ++i)
        if (channels.count(common[i])) chanMask |= std::uint64_t{1} << i;
    bool complete = common.size() <= 12;
    masks.push_back(fullMask);
    if (chanMask != fullMask) masks.push_back(chanMask);
    if (complete) {
        std::vector<std::uint64_t> rest;
        for (std::uint64_t m = 0; m < (std::uint64_t{1} << common.size()); ++m)
            if (m != fullMask && m != chanMask) rest.push_back(m);
        std::sort(rest.begin(), rest.end(), [](std::uint64_t a, std::uint64_t b) {
            int pa = __builtin_popcountll(a), pb = __builtin_popcountll(b);
            if (pa != pb) return pa > pb;
            return a < b;
        });
        masks.insert(masks.end(), rest.begin(), rest.end());
    }

    bool any_exhausted = false;
    std::string fail_note;
    std::uint64_t per = masks.empty() ? budget : std::max<std::uint64_t>(budget / masks.size(), 1);
    for (std::uint64_t m : masks) {
        TreeMatch tm;
        tm.budget = per;
        tm.common = std::set<Term>(common.begin(), common.end());
        for (std::size_t i = 0; i < common.size(); ++i)
            if (m & (std::uint64_t{1} << i)) tm.mu0.emplace_back(common[i], common[i]);
        bool ok = tm.match(t1.get(), t2.get(), tm.mu0, true);
        if (ok && !tm.exhausted) return Tri::True;
        if (tm.exhausted) any_exhausted = true;
        if (fail_note.empty() && !tm.first_fail.empty()) fail_note = tm.first_fail;
    }
    if (any_exhausted || !complete) return Tri::Inconclusive;
    if (evidence) {
        *evidence = fail_note.empty() ? "no execution-tree relation exists for any identity seed"
                                      : fail_note;
    }
    return Tri::False;
}

}  // namespace spv
