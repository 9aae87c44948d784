#pragma once

// Monitoring IP and update processor. Firewalls report their error flags to
// the monitoring IP, which mirrors them into per-firewall registers and
// raises an interrupt toward the update processor. The processor walks the
// security-mode ladder, rewrites policy words over the second BRAM port and
// releases the frozen interface.
//
// Timing of the update protocol, in cycles from the flag:
//   +1   flag extraction into reg_i/reg_m and freeze of the firewall
//   +3   interrupt request delivered (sent in 2 cycles)
//   +151 new configuration computed in software (default latency 148)
//   +151+N  N policy words written, one per cycle
//   +152+N  reactivation, firewall released
// Total: 152 + N with the default software latency.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "busfw/bus.hpp"
#include "busfw/firewall_crypto.hpp"
#include "busfw/firewall_local.hpp"
#include "busfw/policy.hpp"

namespace busfw {

using FirewallRef = std::variant<LocalFirewall*, CryptoFirewall*>;

namespace fwref {

inline std::uint32_t id(const FirewallRef& f) {
    return std::visit([](auto* p) { return p->id(); }, f);
}
inline const std::string& name(const FirewallRef& f) {
    return std::visit([](auto* p) -> const std::string& { return p->name(); }, f);
}
inline bool critical(const FirewallRef& f) {
    return std::visit([](auto* p) { return p->critical(); }, f);
}
inline void freeze(const FirewallRef& f) {
    std::visit([](auto* p) { p->freeze(); }, f);
}
inline void release(const FirewallRef& f) {
    std::visit([](auto* p) { p->release(); }, f);
}
inline bool ready_event(const FirewallRef& f) {
    return std::visit([](auto* p) { return p->ready_event(); }, f);
}
inline void clear_ready_event(const FirewallRef& f) {
    std::visit([](auto* p) { p->clear_ready_event(); }, f);
}
inline PolicyStore& store(const FirewallRef& f) {
    return std::visit([](auto* p) -> PolicyStore& { return p->store(); }, f);
}
inline SecurityMode mode(const FirewallRef& f) {
    return std::visit([](auto* p) { return p->mode(); }, f);
}
inline void set_mode(const FirewallRef& f, SecurityMode m) {
    std::visit([m](auto* p) { p->set_mode(m); }, f);
}
inline const std::vector<std::string>& masters(const FirewallRef& f) {
    return std::visit([](auto* p) -> const std::vector<std::string>& { return p->masters(); }, f);
}

}  // namespace fwref

// reg_i: one 32-bit register per firewall with 3 significant bits, one per
// flag. Bits idle high; a bit drops to 0 when the flag fires. reg_m mirrors
// the significant bits of every reg_i each cycle; up to 10 firewalls fit.
struct MonitorRegisters {
    std::vector<std::uint32_t> reg_i;
    std::uint32_t reg_m = 0xffffffffu;

    static constexpr std::uint32_t kSignificant = 0x7;

    void mirror() {
        std::uint32_t m = 0xffffffffu;
        for (std::size_t i = 0; i < reg_i.size(); ++i) {
            m &= ~(kSignificant << (3 * i));
            m |= (reg_i[i] & kSignificant) << (3 * i);
        }
        reg_m = m;
    }

    bool any_error() const {
        for (std::size_t i = 0; i < reg_i.size(); ++i)
            if ((reg_m >> (3 * i) & kSignificant) != kSignificant) return true;
        return false;
    }
};

class MonitorIp {
public:
    static constexpr std::size_t kMaxFirewalls = 10;

    explicit MonitorIp(std::string name = "monitor") : name_(std::move(name)) {}

    std::size_t register_firewall(FirewallRef fw) {
        if (firewalls_.size() >= kMaxFirewalls)
            throw std::runtime_error("monitoring IP manages at most 10 firewall registers");
        firewalls_.push_back(fw);
        regs_.reg_i.push_back(MonitorRegisters::kSignificant);
        regs_.mirror();
        index_by_id_[fwref::id(fw)] = firewalls_.size() - 1;
        return firewalls_.size() - 1;
    }

    // Called by the kernel in the cycle a firewall raises its flags.
    void raise_flags(const FlagSet& flags, std::uint64_t cycle) {
        if (!flags.any()) return;
        inbox_.push_back(Inflight{flags, cycle});
    }

    void step(std::uint64_t cycle, EventLog* log) {
        // step 1: extraction + freeze, one cycle after the flag
        std::vector<std::uint32_t> extracted;
        for (auto it = inbox_.begin(); it != inbox_.end();) {
            if (cycle >= it->flag_cycle + 1) {
                const auto idx_it = index_by_id_.find(it->flags.firewall_id);
                if (idx_it != index_by_id_.end()) {
                    const std::size_t idx = idx_it->second;
                    std::uint32_t bits = regs_.reg_i[idx];
                    if (it->flags.cf) bits &= ~0x1u;
                    if (it->flags.nf) bits &= ~0x2u;
                    if (it->flags.af) bits &= ~0x4u;
                    regs_.reg_i[idx] = bits;
                    fwref::freeze(firewalls_[idx]);
                    if (log) {
                        log->emit(cycle, name_, "flag", 0,
                                  json{{"firewall", fwref::name(firewalls_[idx])},
                                       {"flags", it->flags.to_string()},
                                       {"reg_i", bits}});
                        log->emit(cycle, name_, "freeze", 0,
                                  json{{"firewall", fwref::name(firewalls_[idx])}});
                    }
                    extracted.push_back(it->flags.firewall_id);
                    flag_cycles_[it->flags.firewall_id] = it->flag_cycle;
                }
                it = inbox_.erase(it);
            } else {
                ++it;
            }
        }
        if (!extracted.empty()) interrupts_.push_back(Pending{extracted, cycle + 2});

        // interrupt request delivered two cycles after extraction
        for (auto it = interrupts_.begin(); it != interrupts_.end();) {
            if (cycle >= it->deliver_cycle) {
                for (std::uint32_t id : it->firewalls) pending_.insert(id);
                if (log) log->emit(cycle, name_, "interrupt", 0, json{{"firewalls", it->firewalls}});
                it = interrupts_.erase(it);
            } else {
                ++it;
            }
        }

        regs_.mirror();  // reg_m follows reg_i every cycle
    }

    bool interrupt_pending() const { return !pending_.empty(); }

    // Work anywhere in the extraction/interrupt pipeline.
    bool busy() const { return !pending_.empty() || !inbox_.empty() || !interrupts_.empty(); }

    // Service order is ascending firewall id.
    std::optional<std::uint32_t> take_interrupt() {
        if (pending_.empty()) return std::nullopt;
        const std::uint32_t id = *pending_.begin();
        pending_.erase(pending_.begin());
        return id;
    }

    std::uint64_t flag_cycle(std::uint32_t firewall_id) const {
        auto it = flag_cycles_.find(firewall_id);
        return it == flag_cycles_.end() ? 0 : it->second;
    }

    void clear_error(std::uint32_t firewall_id) {
        auto it = index_by_id_.find(firewall_id);
        if (it == index_by_id_.end()) return;
        regs_.reg_i[it->second] = MonitorRegisters::kSignificant;
        regs_.mirror();
    }

    void clear_all_errors() {
        for (auto& r : regs_.reg_i) r = MonitorRegisters::kSignificant;
        pending_.clear();
        inbox_.clear();
        interrupts_.clear();
        regs_.mirror();
    }

    FirewallRef firewall_by_id(std::uint32_t id) const { return firewalls_.at(index_by_id_.at(id)); }
    const std::vector<FirewallRef>& firewalls() const { return firewalls_; }
    const MonitorRegisters& regs() const { return regs_; }
    const std::string& name() const { return name_; }

private:
    struct Inflight {
        FlagSet flags;
        std::uint64_t flag_cycle;
    };
    struct Pending {
        std::vector<std::uint32_t> firewalls;
        std::uint64_t deliver_cycle;
    };

    std::string name_;
    std::vector<FirewallRef> firewalls_;
    std::map<std::uint32_t, std::size_t> index_by_id_;
    MonitorRegisters regs_;
    std::deque<Inflight> inbox_;
    std::deque<Pending> interrupts_;
    std::set<std::uint32_t> pending_;
    std::map<std::uint32_t, std::uint64_t> flag_cycles_;
};

struct UpdateReport {
    std::uint32_t firewall_id = 0;
    std::uint64_t flag_cycle = 0;
    std::uint64_t freeze_cycle = 0;
    std::uint64_t interrupt_cycle = 0;
    std::uint32_t software_cycles = 0;
    std::uint32_t words_written = 0;
    std::uint64_t release_cycle = 0;
    std::uint64_t total_cycles = 0;  // release - flag: 152 + N at default latency
    SecurityMode new_mode = SecurityMode::Normal;
    bool ready_event = false;
    bool system_reset = false;
    std::uint64_t policy_version = 0;

    json to_json() const {
        return json{{"firewall", firewall_id},
                    {"flag_cycle", flag_cycle},
                    {"freeze_cycle", freeze_cycle},
                    {"interrupt_cycle", interrupt_cycle},
                    {"software_cycles", software_cycles},
                    {"words_written", words_written},
                    {"release_cycle", release_cycle},
                    {"total_cycles", total_cycles},
                    {"new_mode", to_string(new_mode)},
                    {"ready_event", ready_event},
                    {"system_reset", system_reset},
                    {"policy_version", policy_version}};
    }
};

class UpdateProcessor {
public:
    explicit UpdateProcessor(std::string name = "update_proc", std::uint32_t software_latency = 148)
        : name_(std::move(name)), software_latency_(software_latency) {}

    void attach(MonitorIp* monitor) { monitor_ = monitor; }
    void set_software_latency(std::uint32_t cycles) { software_latency_ = cycles; }
    std::uint32_t software_latency() const { return software_latency_; }

    // Benign security-policy rewrite: same five-step protocol, no mode change.
    // Words default to the firewall's current rights words.
    void request_update(std::uint32_t firewall_id, std::optional<std::vector<std::uint32_t>> words =
                                                       std::nullopt) {
        manual_.push_back(ManualRequest{firewall_id, std::move(words)});
    }

    void step(std::uint64_t cycle, EventLog* log) {
        if (!job_) {
            if (auto id = monitor_ ? monitor_->take_interrupt() : std::nullopt) {
                begin_interrupt_service(*id, cycle);
            } else if (!manual_.empty()) {
                begin_manual_service(cycle);
            }
        }
        if (job_) run_phase(cycle, log);
    }

    bool busy() const { return job_.has_value(); }
    const std::vector<UpdateReport>& reports() const { return reports_; }
    std::uint64_t system_resets() const { return system_resets_; }

private:
    enum class Phase : std::uint8_t { Freeze, Interrupt, Software, Write, Reactivate };

    struct ManualRequest {
        std::uint32_t firewall_id;
        std::optional<std::vector<std::uint32_t>> words;
    };

    struct Job {
        FirewallRef fw;
        UpdateReport report;
        std::vector<std::uint32_t> words;
        std::optional<SecurityMode> new_mode;
        std::deque<Phase> phases;
        std::uint32_t left = 0;
        std::uint32_t word_index = 0;
        bool do_system_reset = false;
    };

    std::string name_;
    std::uint32_t software_latency_;
    MonitorIp* monitor_ = nullptr;
    std::deque<ManualRequest> manual_;
    std::optional<Job> job_;
    std::vector<UpdateReport> reports_;
    std::uint64_t system_resets_ = 0;

    static std::vector<std::uint32_t> current_words(const FirewallRef& fw) {
        std::vector<std::uint32_t> words;
        const PolicyStore& store = fwref::store(fw);
        for (std::uint32_t loc = 1; loc <= store.size(); ++loc)
            words.push_back(store.at(loc).rights_word(fwref::masters(fw)));
        return words;
    }

    // Attack response: the monitor already extracted flags and froze the
    // firewall; this service covers software + write + reactivate.
    void begin_interrupt_service(std::uint32_t id, std::uint64_t cycle) {
        Job j;
        j.fw = monitor_->firewall_by_id(id);
        j.report.firewall_id = id;
        j.report.flag_cycle = monitor_->flag_cycle(id);
        j.report.freeze_cycle = j.report.flag_cycle + 1;
        j.report.interrupt_cycle = cycle - 1;
        const SecurityMode cur = fwref::mode(j.fw);
        if (cur == SecurityMode::Quarantine) {
            j.do_system_reset = true;
        } else if (cur == SecurityMode::Normal && !fwref::critical(j.fw)) {
            j.new_mode = SecurityMode::ReadOnlyIntermediate;
        } else {
            // critical firewalls skip the intermediate mode
            j.new_mode = SecurityMode::Quarantine;
        }
        j.words = current_words(j.fw);
        j.phases = {Phase::Software, Phase::Write, Phase::Reactivate};
        begin_phase(j);
        job_ = std::move(j);
    }

    void begin_manual_service(std::uint64_t cycle) {
        ManualRequest req = std::move(manual_.front());
        manual_.pop_front();
        Job j;
        j.fw = monitor_->firewall_by_id(req.firewall_id);
        j.report.firewall_id = req.firewall_id;
        j.report.flag_cycle = cycle;  // protocol starts immediately; no separate flag
        j.words = req.words ? std::move(*req.words) : current_words(j.fw);
        j.phases = {Phase::Freeze, Phase::Interrupt, Phase::Software, Phase::Write, Phase::Reactivate};
        begin_phase(j);
        job_ = std::move(j);
    }

    void begin_phase(Job& j) {
        switch (j.phases.front()) {
            case Phase::Freeze: j.left = 1; break;
            case Phase::Interrupt: j.left = 2; break;
            case Phase::Software: j.left = software_latency_; break;
            case Phase::Write: j.left = static_cast<std::uint32_t>(j.words.size()); break;
            case Phase::Reactivate: j.left = 1; break;
        }
        j.report.software_cycles = software_latency_;
    }

    void next_phase(Job& j) {
        j.phases.pop_front();
        if (!j.phases.empty()) begin_phase(j);
    }

    void run_phase(std::uint64_t cycle, EventLog* log) {
        Job& j = *job_;

        if (j.do_system_reset) {
            perform_system_reset(j, cycle, log);
            return;
        }

        switch (j.phases.front()) {
            case Phase::Freeze:
                fwref::freeze(j.fw);
                j.report.freeze_cycle = cycle;
                if (log) log->emit(cycle, name_, "freeze", 0, json{{"firewall", fwref::name(j.fw)}});
                next_phase(j);
                break;
            case Phase::Interrupt:
                if (--j.left == 0) {
                    j.report.interrupt_cycle = cycle;
                    if (log)
                        log->emit(cycle, name_, "interrupt", 0,
                                  json{{"firewalls", std::vector<std::uint32_t>{j.report.firewall_id}}});
                    next_phase(j);
                }
                break;
            case Phase::Software:
                if (--j.left == 0) next_phase(j);
                break;
            case Phase::Write: {
                if (j.words.empty()) {
                    next_phase(j);
                    run_phase(cycle, log);
                    return;
                }
                PolicyStore& store = fwref::store(j.fw);
                const std::uint32_t loc = j.word_index + 1;
                if (loc <= store.size())
                    store.at(loc).apply_rights_word(j.words[j.word_index], fwref::masters(j.fw));
                if (log)
                    log->emit(cycle, name_, "policy_write", 0,
                              json{{"firewall", fwref::name(j.fw)},
                                   {"word", j.word_index},
                                   {"value", j.words[j.word_index]}});
                ++j.word_index;
                ++j.report.words_written;
                if (--j.left == 0) next_phase(j);
                break;
            }
            case Phase::Reactivate: {
                PolicyStore& store = fwref::store(j.fw);
                store.bump_version();
                if (j.new_mode) {
                    fwref::set_mode(j.fw, *j.new_mode);
                    j.report.new_mode = *j.new_mode;
                    if (log)
                        log->emit(cycle, name_, "mode_change", 0,
                                  json{{"firewall", fwref::name(j.fw)},
                                       {"mode", to_string(*j.new_mode)}});
                } else {
                    j.report.new_mode = fwref::mode(j.fw);
                }
                j.report.ready_event = fwref::ready_event(j.fw);
                fwref::release(j.fw);
                fwref::clear_ready_event(j.fw);
                monitor_->clear_error(j.report.firewall_id);
                j.report.release_cycle = cycle;
                j.report.total_cycles = cycle - j.report.freeze_cycle + 1;
                j.report.policy_version = store.version();
                if (log)
                    log->emit(cycle, name_, "release", 0,
                              json{{"firewall", fwref::name(j.fw)},
                                   {"ready_event", j.report.ready_event},
                                   {"policy_version", store.version()}});
                reports_.push_back(j.report);
                job_.reset();
                break;
            }
        }
    }

    // Attack while already quarantined: restore the initial policies
    // everywhere and restart from a clean security state.
    void perform_system_reset(Job& j, std::uint64_t cycle, EventLog* log) {
        for (const auto& fw : monitor_->firewalls()) {
            fwref::store(fw).restore_initial();
            fwref::set_mode(fw, SecurityMode::Normal);
            fwref::release(fw);
            fwref::clear_ready_event(fw);
        }
        monitor_->clear_all_errors();
        ++system_resets_;
        j.report.system_reset = true;
        j.report.release_cycle = cycle;
        j.report.total_cycles = cycle - j.report.freeze_cycle + 1;
        j.report.new_mode = SecurityMode::Normal;
        if (log) log->emit(cycle, name_, "system_reset", 0, json{{"trigger", fwref::name(j.fw)}});
        reports_.push_back(j.report);
        job_.reset();
    }
};

}  // namespace busfw
