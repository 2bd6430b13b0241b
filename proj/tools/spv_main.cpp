// Command-line front end for the protocol verifier.

#include "CLI11.hpp"
#include "json.hpp"
#include "spv/protocol.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace {

constexpr std::uint64_t kDefaultBudget = 2'000'000;

spv::ProtocolSystem load_protocol(const std::string& spec, int replication_bound) {
    const auto& names = spv::builtin_names();
    if (std::find(names.begin(), names.end(), spec) != names.end())
        return spv::builtin(spec);
    std::ifstream in(spec);
    if (!in) throw std::runtime_error("cannot open protocol file: " + spec);
    std::ostringstream buf;
    buf << in.rdbuf();
    return spv::parse(buf.str(), replication_bound);
}

void write_report(const spv::VerificationReport& r, const std::string& path) {
    std::string text = spv::report_to_json(r);
    if (path.empty() || path == "-") {
        std::cout << text << "\n";
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    out << text << "\n";
}

int verdict_exit(const std::string& verdict) {
    if (verdict == "holds") return 0;
    if (verdict == "refuted") return 1;
    return 2;
}

std::string frame_summary(const spv::Frame& f) {
    std::string out = "{";
    for (std::size_t i = 0; i < f.disclosed.size(); ++i) {
        if (i) out += ", ";
        out += f.disclosed[i].str();
    }
    out += "}";
    if (!f.cond.is_top()) out += " given " + f.cond.str();
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Symbolic verifier for message-passing security protocols"};
    app.require_subcommand(1);

    std::string protocol;
    std::string property;
    std::string report_path;
    std::string dot_target;
    std::string witness_path;
    std::uint64_t budget = kDefaultBudget;
    int replication_bound = 0;
    bool trace = false;

    auto add_protocol_opt = [&](CLI::App* cmd) {
        cmd->add_option("--protocol", protocol,
                        "Built-in protocol name or path to a .spv file")
            ->required();
        cmd->add_option("--replication-bound", replication_bound,
                        "Override every repl(...) count in the source");
    };

    CLI::App* verify = app.add_subcommand("verify", "Decide a property of a protocol");
    add_protocol_opt(verify);
    verify->add_option("--property", property, "integrity or secrecy")
        ->required()
        ->check(CLI::IsMember({"integrity", "secrecy"}));
    verify->add_option("--budget", budget, "Exploration budget")
        ->envname("SPV_BUDGET");
    verify->add_option("--report", report_path, "Write the JSON report here");

    CLI::App* reduce_cmd =
        app.add_subcommand("reduce", "Apply knowledge-based graph reduction");
    add_protocol_opt(reduce_cmd);
    reduce_cmd->add_flag("--trace", trace, "Print each pass's removed edges");
    reduce_cmd->add_option("--emit-dot", dot_target,
                           "Directory for per-pass DOT renderings");
    reduce_cmd->add_option("--report", report_path, "Write the JSON report here");

    CLI::App* render = app.add_subcommand("render", "Emit the system graph as DOT");
    add_protocol_opt(render);
    render->add_option("--emit-dot", dot_target, "Output file, or - for stdout")
        ->required();

    CLI::App* check = app.add_subcommand("check-cert",
                                         "Validate a serialized equivalence witness");
    add_protocol_opt(check);
    check->add_option("--witness", witness_path, "Witness JSON file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (verify->parsed()) {
            spv::ProtocolSystem ps = load_protocol(protocol, replication_bound);
            spv::VerificationReport r = property == "integrity"
                                            ? spv::verify_integrity(ps, budget)
                                            : spv::verify_secrecy(ps, budget);
            write_report(r, report_path);
            return verdict_exit(r.verdict);
        }

        if (reduce_cmd->parsed()) {
            spv::ProtocolSystem ps = load_protocol(protocol, replication_bound);
            auto t0 = std::chrono::steady_clock::now();
            auto passes = spv::run_reduction_trace(ps);
            std::ostringstream summary;
            const spv::Process* final_graph = &ps.system;
            for (std::size_t i = 0; i < passes.size(); ++i) {
                const auto& [graph, pass] = passes[i];
                final_graph = &graph;
                summary << "pass " << (i + 1) << ": " << pass.removed.size()
                        << " removed, " << pass.pruned_states.size()
                        << " states pruned, " << graph.state_count()
                        << " states remain\n";
                if (trace) {
                    std::cout << "== pass " << (i + 1) << " ==\n";
                    for (const auto& e : pass.removed)
                        std::cout << "  removed " << e.from << " --[" << e.act.str()
                                  << "]--> " << e.to << "  at " << frame_summary(e.at)
                                  << "\n";
                    for (const auto& e : pass.dropped_internal)
                        std::cout << "  dropped " << e.from << " --[" << e.act.str()
                                  << "]--> " << e.to << "\n";
                    for (const auto& s : pass.pruned_states)
                        std::cout << "  pruned state " << s << "\n";
                    for (const auto& e : pass.pruned_edges)
                        std::cout << "  pruned " << e.from << " --[" << e.act.str()
                                  << "]--> " << e.to << "\n";
                }
                if (!dot_target.empty()) {
                    std::filesystem::create_directories(dot_target);
                    std::ofstream out(std::filesystem::path(dot_target) /
                                      ("pass" + std::to_string(i + 1) + ".dot"));
                    out << spv::export_dot(graph);
                }
            }
            if (passes.empty()) summary << "no reducible edges\n";
            std::cout << summary.str();
            if (!report_path.empty()) {
                spv::VerificationReport r;
                r.protocol = ps.name;
                r.property = "reduction";
                r.verdict = "holds";
                r.evidence = std::to_string(passes.size()) + " passes; " +
                             std::to_string(final_graph->state_count()) +
                             " states remain";
                r.wall_ms = std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
                write_report(r, report_path);
            }
            return 0;
        }

        if (render->parsed()) {
            spv::ProtocolSystem ps = load_protocol(protocol, replication_bound);
            std::string dot = spv::export_dot(ps.system);
            if (dot_target == "-") {
                std::cout << dot;
            } else {
                std::ofstream out(dot_target);
                if (!out) throw std::runtime_error("cannot write: " + dot_target);
                out << dot;
            }
            return 0;
        }

        if (check->parsed()) {
            spv::ProtocolSystem ps = load_protocol(protocol, replication_bound);
            auto [left, right] = spv::integrity_pair(ps);
            std::ifstream in(witness_path);
            if (!in) throw std::runtime_error("cannot open witness: " + witness_path);
            std::ostringstream buf;
            buf << in.rdbuf();
            try {
                spv::EquivalenceWitness w =
                    spv::witness_from_json(buf.str(), left, right, ps.keys);
                std::string why;
                if (spv::check_witness(left, right, w, &why)) {
                    std::cout << "certificate valid\n";
                    return 0;
                }
                std::cout << "certificate rejected: " << why << "\n";
                return 1;
            } catch (const nlohmann::json::exception& e) {
                std::cout << "certificate rejected: malformed JSON: " << e.what() << "\n";
                return 1;
            } catch (const spv::ParseError& e) {
                std::cout << "certificate rejected: " << e.what() << "\n";
                return 1;
            } catch (const std::runtime_error& e) {
                std::cout << "certificate rejected: " << e.what() << "\n";
                return 1;
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 3;
}
