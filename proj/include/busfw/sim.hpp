#pragma once

// Deterministic cycle-stepped simulation kernel. Components are stepped in a
// fixed order each clock: scheduled actions, update processor, monitoring IP,
// master issue, firewalls, on-chip slaves. All state changes are a function
// of (state, cycle); two runs over the same topology and trace produce
// bit-identical event logs.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "busfw/bus.hpp"
#include "busfw/firewall_crypto.hpp"
#include "busfw/firewall_local.hpp"
#include "busfw/monitor.hpp"
#include "busfw/policy.hpp"

namespace busfw {

struct SimConfig {
    bool strict_4n = true;
    bool centralized = false;
    std::uint32_t software_latency = 148;
    std::uint32_t raw_hop_cost = 1;  // cycles per 32-bit word per hop
    bool firewalls_enabled = true;   // false: transparent interconnect (baseline runs)
    std::uint64_t max_cycles = 50'000'000;
};

struct TraceOp {
    std::string master;
    std::uint64_t gap = 0;  // idle cycles before issue
    TxnKind kind = TxnKind::Write;
    std::uint64_t addr = 0;
    std::uint32_t size = 4;
    std::uint32_t words = 1;                 // read length
    std::vector<std::uint32_t> data;         // write payload
};

struct Trace {
    std::vector<TraceOp> ops;  // executed strictly in order (blocking application flow)
};

struct TxnResult {
    std::uint64_t seq = 0;
    std::string master;
    TxnKind kind = TxnKind::Write;
    std::uint64_t address = 0;
    std::uint32_t words = 0;
    std::string status;  // ok | blocked | bus_error
    FlagSet flags;
    CycleLedger ledger;
    std::uint64_t bus_cycles = 0;
    std::uint64_t issue_cycle = 0;
    std::uint64_t complete_cycle = 0;
    std::vector<std::uint32_t> payload;

    json to_json() const {
        json j{{"seq", seq},
               {"master", master},
               {"kind", to_string(kind)},
               {"address", address},
               {"words", words},
               {"status", status},
               {"issue_cycle", issue_cycle},
               {"complete_cycle", complete_cycle},
               {"bus_cycles", bus_cycles},
               {"ledger", ledger.to_json()}};
        if (flags.any()) j["flags"] = flags.to_string();
        return j;
    }
};

// Declarative description of the simulated system.
struct Topology {
    struct Master {
        std::string name;
    };
    struct Slave {
        std::string name;
        std::uint64_t low = 0;
        std::uint64_t high = 0;
    };
    struct Firewall {
        std::string name;
        std::uint32_t id = 0;
        std::string kind;    // "local" | "crypto"
        std::string guards;  // master, slave or external name
        bool critical = false;
        std::vector<std::uint32_t> policy_ids;  // empty = all
    };
    struct External {
        std::string name = "ext_mem";
        std::vector<MemorySection> sections;
        std::uint64_t tag_capacity_bits = 15'335'424;
    };

    std::vector<Master> masters;
    std::vector<Slave> slaves;
    std::optional<External> external;
    std::vector<Firewall> firewalls;

    static Topology from_json(const json& doc) {
        Topology t;
        for (const auto& m : doc.value("masters", json::array()))
            t.masters.push_back({m.at("name").get<std::string>()});
        for (const auto& s : doc.value("slaves", json::array()))
            t.slaves.push_back({s.at("name").get<std::string>(), parse_addr(s.at("low"), "slave low"),
                                parse_addr(s.at("high"), "slave high")});
        if (doc.contains("external")) {
            External e;
            const auto& ext = doc.at("external");
            e.name = ext.value("name", "ext_mem");
            e.tag_capacity_bits = ext.value("tag_capacity_bits", 15'335'424ull);
            for (const auto& s : ext.value("sections", json::array()))
                e.sections.push_back({s.at("name").get<std::string>(),
                                      parse_addr(s.at("low"), "section low"),
                                      parse_addr(s.at("high"), "section high"),
                                      s.value("cmode", false), s.value("imode", false)});
            t.external = std::move(e);
        }
        for (const auto& f : doc.value("firewalls", json::array())) {
            Firewall fw;
            fw.name = f.at("name").get<std::string>();
            fw.id = f.at("id").get<std::uint32_t>();
            fw.kind = f.value("kind", "local");
            fw.guards = f.at("guards").get<std::string>();
            fw.critical = f.value("critical", false);
            for (const auto& id : f.value("policies", json::array()))
                fw.policy_ids.push_back(id.get<std::uint32_t>());
            t.firewalls.push_back(std::move(fw));
        }
        return t;
    }
};

inline Trace trace_from_json(const json& doc) {
    Trace t;
    for (const auto& o : doc.value("ops", json::array())) {
        TraceOp op;
        op.master = o.at("master").get<std::string>();
        op.gap = o.value("gap", 0ull);
        op.kind = o.at("kind").get<std::string>() == "read" ? TxnKind::Read : TxnKind::Write;
        op.addr = parse_addr(o.at("addr"), "trace op");
        op.size = o.value("size", 4u);
        if (op.kind == TxnKind::Read) {
            op.words = o.value("words", 1u);
        } else {
            for (const auto& w : o.value("data", json::array()))
                op.data.push_back(w.get<std::uint32_t>());
            if (op.data.empty()) op.data.push_back(0);
            op.words = static_cast<std::uint32_t>(op.data.size());
        }
        t.ops.push_back(std::move(op));
    }
    return t;
}

class Simulation {
public:
    Simulation(Topology topo, json policy_doc, SimConfig cfg = {})
        : topo_(std::move(topo)), policy_doc_(std::move(policy_doc)), cfg_(cfg) {
        build();
    }

    const SimConfig& config() const { return cfg_; }
    std::uint64_t cycle() const { return cycle_; }
    EventLog& log() { return log_; }
    const EventLog& log() const { return log_; }
    const std::vector<TxnResult>& results() const { return results_; }
    MonitorIp& monitor() { return monitor_; }
    UpdateProcessor& updater() { return updater_; }
    CryptoFirewall* crypto_firewall() { return crypto_fw_ ? crypto_fw_.get() : nullptr; }
    ExternalMemory* external_memory() { return crypto_fw_ ? &crypto_fw_->memory() : nullptr; }

    LocalFirewall* local_firewall(const std::string& name) {
        for (auto& fw : local_fws_)
            if (fw->name() == name) return fw.get();
        return nullptr;
    }

    std::uint64_t checks_performed() const { return checks_; }

    // --- trace + injection -------------------------------------------------

    void load_trace(Trace t) {
        trace_ = std::move(t);
        trace_wait_ = trace_.ops.empty() ? 0 : trace_.ops[0].gap;
    }

    std::uint32_t master_index(const std::string& name) const {
        for (std::uint32_t i = 0; i < topo_.masters.size(); ++i)
            if (topo_.masters[i].name == name) return i;
        throw std::runtime_error("unknown master: " + name);
    }

    // Extra master with no firewall of its own (rogue IP / malicious block).
    std::uint32_t add_rogue_master(const std::string& name) {
        topo_.masters.push_back({name});
        return static_cast<std::uint32_t>(topo_.masters.size() - 1);
    }

    // Asynchronous operation issued at an absolute cycle, independent of the
    // blocking trace flow (attack scripts, concurrent hostile traffic).
    void issue_at(std::uint64_t cycle, TraceOp op) { async_ops_.insert({cycle, std::move(op)}); }

    void at_cycle(std::uint64_t cycle, std::function<void(Simulation&)> action) {
        actions_.insert({cycle, std::move(action)});
    }

    // Taps every off-chip word that crosses to/from the external memory from
    // this call on (attack A2 probe).
    void enable_bus_probe() { probe_enabled_ = true; }

    // --- bus module operations --------------------------------------------

    void freeze_ready(const std::string& fw_name) { set_frozen(fw_name, true); }
    void release_ready(const std::string& fw_name) { set_frozen(fw_name, false); }

    // Advances every component one clock cycle.
    void step() {
        auto acts = actions_.equal_range(cycle_);
        for (auto it = acts.first; it != acts.second; ++it) it->second(*this);
        actions_.erase(acts.first, acts.second);

        updater_.step(cycle_, &log_);
        monitor_.step(cycle_, &log_);
        issue_pending();
        for (auto& fw : local_fws_) {
            if (auto done = fw->step(cycle_, cfg_.firewalls_enabled ? &log_ : nullptr))
                on_fw_completion(std::move(*done));
        }
        if (crypto_fw_) {
            if (auto done = crypto_fw_->step(cycle_, cfg_.firewalls_enabled ? &log_ : nullptr))
                on_fw_completion(std::move(*done));
        }
        step_slaves();
        ++cycle_;
    }

    // Runs until the trace is exhausted and the system is quiet.
    std::uint64_t run() {
        while (cycle_ < cfg_.max_cycles && !quiet()) step();
        return cycle_;
    }

    bool quiet() const {
        if (trace_cursor_ < trace_.ops.size() || !async_ops_.empty() || !actions_.empty())
            return false;
        if (!flights_.empty()) return false;
        if (monitor_.busy() || updater_.busy()) return false;
        for (const auto& fw : local_fws_)
            if (fw->busy() || fw->frozen()) return false;
        if (crypto_fw_ && (crypto_fw_->busy() || crypto_fw_->frozen())) return false;
        return true;
    }

private:
    struct Flight {
        Transaction txn;
        std::vector<FirewallRef> route;
        std::size_t hop = 0;
        const Topology::Slave* slave = nullptr;  // on-chip target; null for external
        std::uint32_t slave_left = 0;
        bool at_slave = false;
        std::uint64_t slave_arm = 0;  // cycle the transfer was handed over
        CycleLedger ledger;
        std::uint64_t bus_cycles = 0;
        std::uint64_t issue_cycle = 0;
        std::string master_name;
        bool from_trace = false;
    };

    Topology topo_;
    json policy_doc_;
    SimConfig cfg_;

    std::vector<std::unique_ptr<LocalFirewall>> local_fws_;
    std::unique_ptr<CryptoFirewall> crypto_fw_;
    std::map<std::string, FirewallRef> guard_of_;  // component name -> firewall
    std::map<std::string, std::map<std::uint64_t, std::uint32_t>> slave_words_;
    MonitorIp monitor_;
    UpdateProcessor updater_;
    EventLog log_;

    Trace trace_;
    std::size_t trace_cursor_ = 0;
    std::uint64_t trace_wait_ = 0;      // remaining gap cycles before next op
    bool trace_blocked_ = false;        // an op from the trace is in flight
    std::multimap<std::uint64_t, TraceOp> async_ops_;
    std::multimap<std::uint64_t, std::function<void(Simulation&)>> actions_;

    std::map<std::uint64_t, Flight> flights_;  // by txn seq
    std::vector<TxnResult> results_;
    std::uint64_t cycle_ = 0;
    std::uint64_t next_seq_ = 1;
    std::uint64_t checks_ = 0;
    bool probe_enabled_ = false;

    void build() {
        auto policies_for = [&](const std::vector<std::uint32_t>& ids) {
            if (ids.empty()) return load_policies(policy_doc_);
            json subset = json::array();
            for (const auto& p : policy_doc_)
                for (auto id : ids)
                    if (p.at("id").get<std::uint32_t>() == id) subset.push_back(p);
            return load_policies(subset);
        };

        std::vector<std::string> master_names;
        for (const auto& m : topo_.masters) master_names.push_back(m.name);

        updater_.set_software_latency(cfg_.software_latency);
        updater_.attach(&monitor_);

        for (const auto& f : topo_.firewalls) {
            FirewallConfig fc;
            fc.name = f.name;
            fc.id = f.id;
            fc.strict_4n = cfg_.strict_4n;
            fc.centralized = cfg_.centralized;
            fc.critical = f.critical;
            if (f.kind == "crypto") {
                if (!topo_.external) throw std::runtime_error("crypto firewall needs external memory");
                if (crypto_fw_) throw std::runtime_error("only one crypto firewall is supported");
                crypto_fw_ = std::make_unique<CryptoFirewall>(
                    fc, policies_for(f.policy_ids), master_names, topo_.external->sections,
                    topo_.external->tag_capacity_bits, cfg_.raw_hop_cost);
                guard_of_[f.guards] = crypto_fw_.get();
                monitor_.register_firewall(crypto_fw_.get());
            } else {
                local_fws_.push_back(
                    std::make_unique<LocalFirewall>(fc, policies_for(f.policy_ids), master_names));
                guard_of_[f.guards] = local_fws_.back().get();
                monitor_.register_firewall(local_fws_.back().get());
            }
        }
        if (crypto_fw_) validate_sections();
        for (const auto& s : topo_.slaves) slave_words_[s.name];
    }

    // Every section must be covered by exactly one policy whose crypto modes
    // agree with the section metadata.
    void validate_sections() {
        for (const auto& sec : crypto_fw_->sections()) {
            const std::uint32_t loc = crypto_fw_->table().lookup(sec.low);
            if (loc == kPolicyNotFound)
                throw PolicyError("section " + sec.name + " has no covering policy");
            const auto& p = crypto_fw_->store().at(loc);
            if (p.cmode != sec.cmode || p.imode != sec.imode)
                throw PolicyError("section " + sec.name + " crypto modes disagree with its policy");
            if (p.range_low > sec.low || p.range_high < sec.high)
                throw PolicyError("section " + sec.name + " not fully covered by its policy");
        }
    }

    void set_frozen(const std::string& fw_name, bool frozen) {
        for (auto& fw : local_fws_)
            if (fw->name() == fw_name) {
                frozen ? fw->freeze() : fw->release();
                return;
            }
        if (crypto_fw_ && crypto_fw_->name() == fw_name) {
            frozen ? crypto_fw_->freeze() : crypto_fw_->release();
            return;
        }
        throw std::runtime_error("unknown firewall: " + fw_name);
    }

    const Topology::Slave* find_slave(std::uint64_t addr) const {
        for (const auto& s : topo_.slaves)
            if (addr >= s.low && addr < s.high) return &s;
        return nullptr;
    }

    bool targets_external(std::uint64_t addr) const {
        if (!topo_.external) return false;
        for (const auto& sec : topo_.external->sections)
            if (sec.contains(addr)) return true;
        return false;
    }

    void issue_pending() {
        // async (attack) operations scheduled for this cycle
        auto range = async_ops_.equal_range(cycle_);
        std::vector<TraceOp> to_issue;
        for (auto it = range.first; it != range.second; ++it) to_issue.push_back(it->second);
        async_ops_.erase(range.first, range.second);
        for (auto& op : to_issue) issue_op(op, false);

        // the blocking application trace
        if (trace_blocked_ || trace_cursor_ >= trace_.ops.size()) return;
        if (trace_wait_ > 0) {
            --trace_wait_;
            return;
        }
        issue_op(trace_.ops[trace_cursor_], true);
        trace_blocked_ = true;
        ++trace_cursor_;
    }

    void issue_op(const TraceOp& op, bool from_trace) {
        const std::uint32_t mi = master_index(op.master);
        Transaction txn = op.kind == TxnKind::Read
                              ? Transaction::make_read(next_seq_, mi, op.addr, op.words, op.size)
                              : Transaction::make_write(next_seq_, mi, op.addr, op.data, op.size);
        ++next_seq_;

        Flight fl;
        fl.master_name = op.master;
        fl.issue_cycle = cycle_;
        fl.from_trace = from_trace;
        fl.slave = find_slave(op.addr);
        const bool external = targets_external(op.addr);

        if (cfg_.firewalls_enabled) {
            auto guard = guard_of_.find(op.master);
            if (guard != guard_of_.end()) fl.route.push_back(guard->second);
            if (external) {
                if (crypto_fw_) fl.route.push_back(crypto_fw_.get());
            } else if (fl.slave) {
                auto sg = guard_of_.find(fl.slave->name);
                if (sg != guard_of_.end()) fl.route.push_back(sg->second);
            }
        } else if (external && crypto_fw_) {
            // baseline runs still need the memory to function; model the
            // access as a raw transfer without checking or crypto
            fl.slave = nullptr;
        }

        log_.emit(cycle_, op.master, "issue", txn.seq,
                  json{{"kind", to_string(op.kind)},
                       {"addr", op.addr},
                       {"words", txn.words()},
                       {"from_trace", from_trace}});

        if (!fl.route.empty()) {
            const FirewallRef first = fl.route[0];
            fl.txn = txn;
            flights_.emplace(txn.seq, std::move(fl));
            std::visit([&](auto* fw) { fw->push(txn, cycle_); }, first);
        } else if (fl.slave || external || !cfg_.firewalls_enabled) {
            // straight to the raw transfer
            fl.txn = txn;
            fl.at_slave = true;
            fl.slave_arm = cycle_;
            fl.slave_left = std::max<std::uint32_t>(1, txn.words() * cfg_.raw_hop_cost);
            flights_.emplace(txn.seq, std::move(fl));
        } else {
            // nothing decodes this address
            TxnResult r = make_result(txn, fl, "bus_error");
            r.complete_cycle = cycle_;
            log_.emit(cycle_, op.master, "complete", txn.seq, json{{"status", "bus_error"}});
            finish_txn(std::move(r), from_trace);
        }
    }

    void on_fw_completion(FwCompletion done) {
        auto it = flights_.find(done.txn.seq);
        if (it == flights_.end()) return;
        Flight& fl = it->second;
        fl.ledger += done.ledger;
        fl.bus_cycles += done.bus_cycles;
        ++checks_;

        if (done.outcome == FwOutcome::Block) {
            monitor_.raise_flags(done.flags, cycle_);
            TxnResult r = make_result(done.txn, fl, "blocked");
            r.flags = done.flags;
            r.complete_cycle = cycle_;
            log_.emit(cycle_, fl.master_name, "complete", done.txn.seq,
                      json{{"status", "blocked"}, {"flags", done.flags.to_string()}});
            const bool from_trace = fl.from_trace;
            flights_.erase(it);
            finish_txn(std::move(r), from_trace);
            return;
        }

        fl.txn = std::move(done.txn);
        ++fl.hop;
        if (fl.hop < fl.route.size()) {
            std::visit([&](auto* fw) { fw->push(fl.txn, cycle_); }, fl.route[fl.hop]);
            return;
        }

        const bool was_external = targets_external(fl.txn.address);
        if (was_external) {
            // the crypto firewall is the memory controller: transfer done
            if (probe_enabled_) emit_probe(fl);
            complete_flight(it);
            return;
        }
        if (fl.slave) {
            fl.at_slave = true;
            fl.slave_arm = cycle_;
            fl.slave_left = std::max<std::uint32_t>(1, fl.txn.words() * cfg_.raw_hop_cost);
            return;
        }
        complete_flight(it);
    }

    void step_slaves() {
        std::vector<std::uint64_t> finished;
        for (auto& [seq, fl] : flights_) {
            if (!fl.at_slave || fl.slave_arm == cycle_) continue;
            fl.bus_cycles++;
            if (--fl.slave_left == 0) finished.push_back(seq);
        }
        for (auto seq : finished) {
            auto it = flights_.find(seq);
            Flight& fl = it->second;
            apply_slave_access(fl);
            complete_flight(it);
        }
    }

    void apply_slave_access(Flight& fl) {
        if (!fl.slave) return;
        auto& words = slave_words_[fl.slave->name];
        if (fl.txn.kind == TxnKind::Write) {
            for (std::uint32_t w = 0; w < fl.txn.words(); ++w)
                words[fl.txn.address + 4ull * w] = fl.txn.payload[w];
            log_.emit(cycle_, fl.slave->name, "deliver", fl.txn.seq,
                      json{{"words", fl.txn.payload}, {"valid_ready", true}});
        } else {
            for (std::uint32_t w = 0; w < fl.txn.words(); ++w) {
                auto stored = words.find(fl.txn.address + 4ull * w);
                fl.txn.payload[w] = stored == words.end() ? 0 : stored->second;
            }
        }
    }

    void complete_flight(std::map<std::uint64_t, Flight>::iterator it) {
        Flight& fl = it->second;
        TxnResult r = make_result(fl.txn, fl, "ok");
        r.complete_cycle = cycle_;
        r.payload = fl.txn.payload;
        log_.emit(cycle_, fl.master_name, "complete", fl.txn.seq,
                  json{{"status", "ok"},
                       {"elapsed", cycle_ - fl.issue_cycle + 1},
                       {"ledger_total", fl.ledger.total()}});
        const bool from_trace = fl.from_trace;
        flights_.erase(it);
        finish_txn(std::move(r), from_trace);
    }

    void finish_txn(TxnResult r, bool from_trace) {
        results_.push_back(std::move(r));
        if (from_trace) {
            trace_blocked_ = false;
            if (trace_cursor_ < trace_.ops.size()) trace_wait_ = trace_.ops[trace_cursor_].gap;
        }
    }

    TxnResult make_result(const Transaction& txn, const Flight& fl, std::string status) {
        TxnResult r;
        r.seq = txn.seq;
        r.master = fl.master_name;
        r.kind = txn.kind;
        r.address = txn.address;
        r.words = txn.words();
        r.status = std::move(status);
        r.ledger = fl.ledger;
        r.bus_cycles = fl.bus_cycles;
        r.issue_cycle = fl.issue_cycle;
        return r;
    }

    // Attack A2 view: the raw words present on the off-chip bus for this
    // transfer (exactly the external-memory image of the touched range).
    void emit_probe(const Flight& fl) {
        if (!crypto_fw_) return;
        std::vector<std::uint32_t> words;
        for (std::uint32_t w = 0; w < fl.txn.words(); ++w)
            words.push_back(crypto_fw_->memory().read_word(fl.txn.address + 4ull * w));
        log_.emit(cycle_, "bus_probe", "tap", fl.txn.seq,
                  json{{"addr", fl.txn.address}, {"words", words}});
    }
};

}  // namespace busfw
