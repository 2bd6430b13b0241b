#pragma once

#include "spv/equivalence.hpp"
#include "spv/process.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace spv {

struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, int line_, int col_)
        : std::runtime_error("line " + std::to_string(line_) + ", col " +
                             std::to_string(col_) + ": " + msg),
          line(line_),
          col(col_) {}
    int line;
    int col;
};

struct UnknownProtocol : std::runtime_error {
    explicit UnknownProtocol(const std::string& name)
        : std::runtime_error("unknown protocol: " + name) {}
};

/// A parsed protocol: the individual agent processes, the composed system,
/// the modified system whose designated receiver re-asserts that the value it
/// received equals the one that was sent, and the continuation stub standing
/// for the unspecified rest of the protocol.
struct ProtocolSystem {
    std::string name;
    std::map<std::string, Process> agents;
    Process system;
    Process modifiedSystem;
    Process continuation;
    std::string secret;    // variable whose value secrecy is about ("" if none)
    std::string observed;  // variable the receiver binds ("" if none)
    std::set<std::string> channels, keys, vars, consts;
    std::string source;    // the DSL text this system was built from
};

/// Parses a `.spv` source. A positive replication_bound overrides the literal
/// counts of every `repl(...)` in the text.
ProtocolSystem parse(const std::string& text, int replication_bound = 0);

/// The four case studies, constructed from embedded sources identical to the
/// ones shipped under protocols/.
ProtocolSystem builtin(const std::string& name);
const std::vector<std::string>& builtin_names();

/// The DSL text of the system; parse(pretty_print(ps)) rebuilds the same
/// graphs.
std::string pretty_print(const ProtocolSystem& ps);

struct VerificationReport {
    std::string protocol;
    std::string property;  // integrity | secrecy | reduction
    std::string verdict;   // holds | refuted | inconclusive
    std::string evidence;
    std::string witness_json;  // set when a witness certifies a holds verdict
    std::uint64_t states_explored = 0;
    double wall_ms = 0.0;
};

/// Decides whether the system is observationally equivalent to the modified
/// system (no environment can tell the re-asserting receiver apart): reduce
/// both graphs, search for a witness, fall back to the execution-tree check.
VerificationReport verify_integrity(const ProtocolSystem& ps, std::uint64_t budget);

/// Decides value secrecy: with fresh distinct constants v1, v2, first checks
/// the premise that the continuation cannot tell the received values apart
/// ([y=v1]P vs [y=v2]P), then the conclusion that whole sessions carrying the
/// two values are indistinguishable ([x=v1]Sys vs [x=v2]Sys).
VerificationReport verify_secrecy(const ProtocolSystem& ps, std::uint64_t budget);

/// The staged reduction of the system graph, one entry per pass that changed
/// something: the graph after the pass and what the pass removed.
std::vector<std::pair<Process, ReductionPass>> run_reduction_trace(const ProtocolSystem& ps);

/// The two reduced graphs whose equivalence the integrity property asserts;
/// certificates are checked against exactly these.
std::pair<Process, Process> integrity_pair(const ProtocolSystem& ps);

/// Deterministic DOT rendering; the initial state is double-circled.
std::string export_dot(const Process& p);

std::string report_to_json(const VerificationReport& r);

/// Witness (de)serialization against a fixed pair of processes. States are
/// referenced by name; terms and formulas by their printed form, so the
/// reader needs to know which identifiers are key variables.
std::string witness_to_json(const EquivalenceWitness& w, const Process& left,
                            const Process& right);
EquivalenceWitness witness_from_json(const std::string& text, const Process& left,
                                     const Process& right,
                                     const std::set<std::string>& key_names);

/// Parsers for the printed forms: constants 'c', application k(e) for
/// encryption, (a, b) sequences, () for the empty sequence; atoms
/// (e1 = e2) and (e in {...}) joined by &; "true" for the empty conjunction.
Term term_from_string(const std::string& text, const std::set<std::string>& key_names);
Formula formula_from_string(const std::string& text, const std::set<std::string>& key_names);

}  // namespace spv
