// Batch front end: run built-in scenarios or explicit topology/policy/trace
// files, estimate firewall area, and size the trusted tag memory.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "busfw/report.hpp"

namespace {

using busfw::json;

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const std::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

// "14976Kbit", "1.5Mbit", "2097152bit" or a plain bit count.
std::uint64_t parse_capacity_bits(const std::string& text) {
    std::size_t pos = 0;
    const double value = std::stod(text, &pos);
    std::string unit = text.substr(pos);
    for (auto& c : unit) c = static_cast<char>(std::tolower(c));
    double factor = 1.0;
    if (unit.empty() || unit == "bit" || unit == "bits") factor = 1.0;
    else if (unit == "kbit" || unit == "kb") factor = 1e3;
    else if (unit == "mbit" || unit == "mb") factor = 1e6;
    else if (unit == "gbit") factor = 1e9;
    else throw std::runtime_error("unknown capacity unit: " + unit);
    return static_cast<std::uint64_t>(value * factor);
}

int worst_exit(const std::vector<int>& codes) {
    int worst = 0;
    for (int c : codes) {
        if (c == 1) return 1;
        if (c == 2) worst = 2;
    }
    return worst;
}

std::string latency_csv(const std::vector<busfw::RunReport>& reports) {
    std::ostringstream os;
    os << "scenario,total,check,crypto,update_stall\n";
    for (const auto& r : reports)
        os << r.scenario << ',' << (r.total ? *r.total : r.ledger_sum.total()) << ','
           << r.ledger_sum.check_total() << ',' << r.ledger_sum.crypto << ','
           << r.ledger_sum.update_stall << '\n';
    return os.str();
}

void print_area_row(const char* label, const busfw::AreaEstimate& e) {
    std::printf("%-12s %10llu %10llu %10llu\n", label, static_cast<unsigned long long>(e.slices),
                static_cast<unsigned long long>(e.regs), static_cast<unsigned long long>(e.luts));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bus-firewall MPSoC simulator"};
    app.require_subcommand(1);

    // --- run -----------------------------------------------------------------
    auto* run = app.add_subcommand("run", "run a scenario or a topology/trace file pair");
    std::string topology_path, policies_path, trace_path, scenario, out_path, log_path, csv_path,
        dump_path;
    std::string mode = "distributed";
    busfw::ScenarioOptions opt;
    unsigned jobs = 1;
    run->add_option("--topology", topology_path, "topology JSON");
    run->add_option("--policies", policies_path, "policy document JSON");
    run->add_option("--trace", trace_path, "trace JSON");
    run->add_option("--scenario", scenario, "built-in scenario name(s), comma separated, or 'all'");
    run->add_option("--scale", opt.scale, "trace scale factor")->default_val(1.0);
    run->add_option("--strict-4n", opt.strict_4n, "re-resolve the policy for every word")
        ->default_val(true);
    run->add_option("--software-latency", opt.software_latency,
                    "update-processor software latency in cycles")
        ->default_val(148);
    run->add_option("--mode", mode, "distributed|centralized")
        ->check(CLI::IsMember({"distributed", "centralized"}));
    run->add_option("--out", out_path, "write the report JSON here (default stdout)");
    run->add_option("--log", log_path, "write the event log (JSON lines) here");
    run->add_option("--csv", csv_path, "write per-scenario latency rows here");
    run->add_option("--dump-memory", dump_path, "write a hex image of the external memory here");
    run->add_flag("--canonical", opt.canonical, "strip wall-clock metadata from the report");
    run->add_option("--jobs", jobs, "parallel scenario runs")->default_val(1);

    // --- area ------------------------------------------------------------------
    auto* area = app.add_subcommand("area", "estimate firewall area for x local + y crypto");
    std::uint64_t area_x = 0, area_y = 0;
    area->add_option("x", area_x, "number of local firewalls")->required();
    area->add_option("y", area_y, "number of cryptographic firewalls")->required();

    // --- tagbudget ---------------------------------------------------------------
    auto* budget = app.add_subcommand("tagbudget", "protectable bytes for a trusted-memory budget");
    std::string capacity_text;
    budget->add_option("capacity", capacity_text, "e.g. 14976Kbit")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            opt.centralized = mode == "centralized";
            opt.dump_memory = !dump_path.empty();

            std::vector<busfw::RunReport> reports;
            if (!scenario.empty()) {
                std::vector<std::string> names =
                    scenario == "all" ? busfw::scenario_names() : split_list(scenario);
                reports.resize(names.size());
                if (jobs <= 1) {
                    for (std::size_t i = 0; i < names.size(); ++i)
                        reports[i] = busfw::run_scenario(names[i], opt);
                } else {
                    // independent simulations; a shared cursor hands out work
                    std::mutex next_mutex;
                    std::size_t next = 0;
                    auto worker = [&] {
                        while (true) {
                            std::size_t i;
                            {
                                std::lock_guard<std::mutex> lk(next_mutex);
                                if (next >= names.size()) return;
                                i = next++;
                            }
                            reports[i] = busfw::run_scenario(names[i], opt);
                        }
                    };
                    std::vector<std::thread> pool;
                    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
                    for (auto& th : pool) th.join();
                }
            } else {
                if (topology_path.empty() || trace_path.empty())
                    throw std::runtime_error("run needs --scenario or --topology + --trace");
                const json topo = load_json(topology_path);
                const json pol = policies_path.empty() ? json::array() : load_json(policies_path);
                const json tr = load_json(trace_path);
                reports.push_back(busfw::run_files(topo, pol, tr, opt));
            }

            json out = json::array();
            for (const auto& r : reports) out.push_back(r.to_json(opt.canonical));
            const std::string text = (reports.size() == 1 ? out[0] : out).dump(2) + "\n";
            if (out_path.empty()) std::cout << text;
            else write_file(out_path, text);

            if (!log_path.empty()) {
                std::string all_logs;
                for (const auto& r : reports) all_logs += r.event_log;
                write_file(log_path, all_logs);
            }
            if (!csv_path.empty()) write_file(csv_path, latency_csv(reports));
            if (!dump_path.empty()) {
                std::string dumps;
                for (const auto& r : reports) dumps += r.memory_dump;
                write_file(dump_path, dumps);
            }

            std::vector<int> codes;
            for (const auto& r : reports) codes.push_back(r.exit_code);
            return worst_exit(codes);
        }

        if (area->parsed()) {
            const auto est = busfw::estimate_area(area_x, area_y);
            std::printf("%-12s %10s %10s %10s\n", "firewalls", "slices", "regs", "luts");
            print_area_row("local", busfw::estimate_area(area_x, 0));
            print_area_row("crypto", busfw::estimate_area(0, area_y));
            print_area_row("total", est);
            json j{{"local", area_x},
                   {"crypto", area_y},
                   {"slices", est.slices},
                   {"regs", est.regs},
                   {"luts", est.luts}};
            std::cout << j.dump() << "\n";
            return 0;
        }

        if (budget->parsed()) {
            const std::uint64_t bits = parse_capacity_bits(capacity_text);
            const std::uint64_t bytes = busfw::max_protectable_bytes(bits / 8);
            std::printf("%-22s %llu\n", "capacity (bits)", static_cast<unsigned long long>(bits));
            std::printf("%-22s %llu\n", "protectable (bytes)",
                        static_cast<unsigned long long>(bytes));
            std::printf("%-22s %.2f\n", "protectable (MB)", double(bytes) / 1e6);
            json j{{"capacity_bits", bits},
                   {"protectable_bytes", bytes},
                   {"protectable_mb", double(bytes) / 1e6}};
            std::cout << j.dump() << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
