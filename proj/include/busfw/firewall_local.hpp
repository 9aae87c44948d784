#pragma once

// Local Firewall: the Security Builder (correspondence-table client, policy
// reader, checking module, FSM) behind a two-cycle Firewall Interface.
// The machine is stepped one clock at a time by the simulation kernel; the
// transaction-at-once process() driver runs the same machine to completion.
//
// Cycle budget per 32-bit word: 1 Addr + 1 Par + 2 Chk. A full N-word check
// costs 4N builder cycles in strict mode (the table is re-resolved for every
// word); the relaxed mode resolves the policy once and spends 2 + 2N builder
// cycles. The interface adds 2 cycles per transaction: decision + sync.

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "busfw/bus.hpp"
#include "busfw/policy.hpp"

namespace busfw {

enum class FsmState : std::uint8_t { Idle, Addr, Par, Chk, Ok, Fail };

inline const char* to_string(FsmState s) {
    switch (s) {
        case FsmState::Idle: return "Idle";
        case FsmState::Addr: return "Addr";
        case FsmState::Par: return "Par";
        case FsmState::Chk: return "Chk";
        case FsmState::Ok: return "OK";
        case FsmState::Fail: return "FAIL";
    }
    return "?";
}

// Idle->Addr->Par->Chk->(OK|FAIL)->Idle, plus the self loops of multi-cycle
// states and the Chk->Addr word loop of strict mode.
inline bool legal_fsm_transition(FsmState from, FsmState to) {
    switch (from) {
        case FsmState::Idle: return to == FsmState::Addr || to == FsmState::Idle;
        case FsmState::Addr: return to == FsmState::Par || to == FsmState::Fail;
        case FsmState::Par: return to == FsmState::Chk;
        case FsmState::Chk:
            return to == FsmState::Chk || to == FsmState::Ok || to == FsmState::Fail ||
                   to == FsmState::Addr;
        case FsmState::Ok: return to == FsmState::Ok || to == FsmState::Idle;
        case FsmState::Fail: return to == FsmState::Idle;
    }
    return false;
}

enum class CheckFailReason : std::uint8_t { None, Rights, Format };

struct CheckOutcome {
    bool check_out = false;
    CheckFailReason reason = CheckFailReason::None;
};

// The checking module: read/write right and data format compared against the
// policy in parallel; the output is the AND of all comparators. The operation
// kind comes from the ARID test (nonzero id = read), which selects whether
// ARSIZE or AWSIZE feeds the format comparator.
inline CheckOutcome check_word(const Transaction& txn, const SecurityPolicy& policy,
                               const std::string& master_name,
                               SecurityMode mode = SecurityMode::Normal) {
    const TxnKind kind = txn.txn_id != 0 ? TxnKind::Read : TxnKind::Write;
    const AccessRight right = apply_mode_overlay(mode, policy.right_for(master_name));
    if (!allows(right, kind)) return {false, CheckFailReason::Rights};
    if (txn.size != policy.format) return {false, CheckFailReason::Format};
    return {true, CheckFailReason::None};
}

enum class FwOutcome : std::uint8_t { Forward, Block };

struct FwCompletion {
    Transaction txn;
    CycleLedger ledger;
    FwOutcome outcome = FwOutcome::Forward;
    FlagSet flags;
    std::uint64_t policy_version = 0;
    std::uint64_t bus_cycles = 0;  // raw transfer time spent inside the firewall (crypto fw only)
};

struct FirewallConfig {
    std::string name = "fw";
    std::uint32_t id = 0;
    bool strict_4n = true;
    bool centralized = false;  // charge a 4-cycle interface<->manager roundtrip per check
    bool critical = false;     // critical firewalls go straight to quarantine
};

class LocalFirewall {
public:
    LocalFirewall(FirewallConfig cfg, LoadedPolicies policies, std::vector<std::string> masters)
        : cfg_(std::move(cfg)),
          table_(std::move(policies.table)),
          store_(std::move(policies.store)),
          masters_(std::move(masters)) {}

    const std::string& name() const { return cfg_.name; }
    std::uint32_t id() const { return cfg_.id; }
    const FirewallConfig& config() const { return cfg_; }
    bool critical() const { return cfg_.critical; }

    CorrespondenceTable& table() { return table_; }
    PolicyStore& store() { return store_; }
    const PolicyStore& store() const { return store_; }
    const std::vector<std::string>& masters() const { return masters_; }

    SecurityMode mode() const { return mode_; }
    void set_mode(SecurityMode m) { mode_ = m; }

    // --- freeze protocol -------------------------------------------------
    // While frozen the interface holds its ready outputs low: nothing is
    // accepted, nothing is forwarded, and any arrival latches readyEvent.
    void freeze() {
        frozen_ = true;
        recfg_en_ = true;
        handshake_.set_frozen(true);
    }
    void release() {
        frozen_ = false;
        recfg_en_ = false;
        handshake_.set_frozen(false);
    }
    bool frozen() const { return frozen_; }
    bool recfg_en() const { return recfg_en_; }
    bool ready_event() const { return ready_event_; }
    void clear_ready_event() { ready_event_ = false; }
    const HandshakeState& handshake() const { return handshake_; }

    // --- kernel interface -------------------------------------------------
    // Arrivals are latched on a clock edge: a transaction pushed during cycle
    // c is first considered for processing in cycle c + 1.
    void push(Transaction txn, std::uint64_t arrival_cycle = 0) {
        if (!handshake_.accepts(txn.kind)) ready_event_ = true;  // ready edge while frozen
        queue_.push_back(Pending{std::move(txn), 0, arrival_cycle});
    }

    bool busy() const { return job_.has_value() || !queue_.empty(); }
    FsmState fsm_state() const { return job_ ? job_->fsm : FsmState::Idle; }

    // Advances one clock cycle. Returns a completion when a transaction
    // leaves the firewall this cycle (forwarded or blocked).
    std::optional<FwCompletion> step(std::uint64_t cycle, EventLog* log) {
        if (frozen_) {
            stall_waiting(cycle);
            return std::nullopt;
        }
        if (!job_ && !queue_.empty() && queue_.front().arrival < cycle) start_job();
        if (!job_) return std::nullopt;
        return advance(cycle, log);
    }

    // Runs one transaction through an idle, unfrozen firewall and reports the
    // outcome with its cycle ledger.
    FwCompletion process(Transaction txn, EventLog* log = nullptr, std::uint64_t start_cycle = 0) {
        push(std::move(txn), start_cycle);
        std::uint64_t cycle = start_cycle + 1;
        while (true) {
            if (auto done = step(cycle, log)) return std::move(*done);
            ++cycle;
        }
    }

protected:
    struct Pending {
        Transaction txn;
        std::uint64_t stall = 0;  // cycles spent against a frozen interface
        std::uint64_t arrival = 0;
    };

    struct Job {
        Transaction txn;
        CycleLedger ledger;
        FsmState fsm = FsmState::Idle;
        std::optional<FsmState> pending;  // transition applied on the next clock edge
        std::uint32_t word = 0;
        std::uint32_t stage_left = 0;    // remaining cycles in current state
        std::uint32_t mgr_left = 0;      // centralized roundtrip cycles
        std::uint32_t policy_loc = kPolicyNotFound;
        std::uint64_t version_used = 0;
        FlagSet flags;
        CheckFailReason reason = CheckFailReason::None;
    };

    FirewallConfig cfg_;
    CorrespondenceTable table_;
    PolicyStore store_;
    std::vector<std::string> masters_;
    SecurityMode mode_ = SecurityMode::Normal;

    bool frozen_ = false;
    bool recfg_en_ = false;
    bool ready_event_ = false;
    HandshakeState handshake_;

    std::deque<Pending> queue_;
    std::optional<Job> job_;

    void stall_waiting(std::uint64_t cycle) {
        if (job_) job_->ledger.update_stall++;
        for (auto& p : queue_)
            if (p.arrival < cycle) p.stall++;
    }

    void start_job() {
        Pending p = std::move(queue_.front());
        queue_.pop_front();
        Job j;
        j.txn = std::move(p.txn);
        j.ledger.update_stall = p.stall;
        j.flags.firewall_id = cfg_.id;
        j.mgr_left = cfg_.centralized ? 4 : 0;
        enter(j, FsmState::Addr);
        job_ = std::move(j);
    }

    void enter(Job& j, FsmState to) {
        j.fsm = to;
        switch (to) {
            case FsmState::Addr: j.stage_left = 1; break;
            case FsmState::Par: j.stage_left = 1; break;
            case FsmState::Chk: j.stage_left = 2; break;
            case FsmState::Ok: j.stage_left = 2; break;  // decision + sync
            case FsmState::Fail: j.stage_left = 1; break;
            case FsmState::Idle: j.stage_left = 0; break;
        }
    }

    std::uint64_t word_address(const Job& j) const {
        return j.txn.address + std::uint64_t(j.word) * j.txn.size;
    }

    const std::string& master_name(const Job& j) const {
        static const std::string unknown = "?";
        return j.txn.master < masters_.size() ? masters_[j.txn.master] : unknown;
    }

    std::optional<FwCompletion> advance(std::uint64_t cycle, EventLog* log) {
        Job& j = *job_;
        if (j.pending) {
            enter(j, *j.pending);
            j.pending.reset();
        }

        // Centralized checking routes the request through the security
        // manager first; the roundtrip is interface time.
        if (j.mgr_left > 0) {
            j.ledger.interface++;
            if (--j.mgr_left == 0 && log)
                log->emit(cycle, cfg_.name, "fw_manager_roundtrip", j.txn.seq, json{{"cycles", 4}});
            return std::nullopt;
        }

        switch (j.fsm) {
            case FsmState::Addr:
                j.ledger.table_lookup++;
                j.policy_loc = table_.lookup(word_address(j));
                if (--j.stage_left == 0) {
                    if (j.policy_loc == kPolicyNotFound) {
                        j.flags.nf = true;
                        j.pending = FsmState::Fail;
                    } else {
                        j.pending = FsmState::Par;
                    }
                }
                break;
            case FsmState::Par:
                j.ledger.policy_read++;
                if (--j.stage_left == 0) j.pending = FsmState::Chk;
                break;
            case FsmState::Chk: {
                j.ledger.check++;
                if (--j.stage_left == 0) {
                    j.version_used = store_.version();
                    const CheckOutcome out =
                        check_word(j.txn, store_.at(j.policy_loc), master_name(j), mode_);
                    if (!out.check_out) {
                        j.flags.cf = true;
                        j.reason = out.reason;
                        j.pending = FsmState::Fail;
                    } else if (j.word + 1 < j.txn.words()) {
                        ++j.word;
                        j.pending = cfg_.strict_4n ? FsmState::Addr : FsmState::Chk;
                    } else {
                        if (log)
                            log->emit(cycle, cfg_.name, "fw_check", j.txn.seq,
                                      json{{"check_out", 1},
                                           {"words", j.txn.words()},
                                           {"policy_version", j.version_used},
                                           {"cycles", j.ledger.check_total() + 2}});
                        j.pending = FsmState::Ok;
                    }
                }
                break;
            }
            case FsmState::Ok:
                j.ledger.interface++;
                // data crosses the interface during synchronization: valid high
                handshake_.rvalid = j.txn.kind == TxnKind::Read;
                handshake_.wvalid = j.txn.kind == TxnKind::Write;
                if (--j.stage_left == 0) {
                    handshake_.rvalid = handshake_.wvalid = false;
                    return finish(cycle, log, FwOutcome::Forward);
                }
                break;
            case FsmState::Fail:
                if (--j.stage_left == 0) {
                    if (log)
                        log->emit(cycle, cfg_.name, "fw_block", j.txn.seq,
                                  json{{"flags", j.flags.to_string()},
                                       {"reason", j.reason == CheckFailReason::Format ? "format"
                                                  : j.reason == CheckFailReason::Rights
                                                      ? "rights"
                                                      : "not_found"},
                                       {"policy_version", store_.version()}});
                    return finish(cycle, log, FwOutcome::Block);
                }
                break;
            case FsmState::Idle: break;
        }
        return std::nullopt;
    }

    std::optional<FwCompletion> finish(std::uint64_t, EventLog*, FwOutcome outcome) {
        FwCompletion done;
        done.txn = std::move(job_->txn);
        done.ledger = job_->ledger;
        done.outcome = outcome;
        done.flags = job_->flags;
        done.policy_version = job_->version_used ? job_->version_used : store_.version();
        job_.reset();
        return done;
    }
};

}  // namespace busfw
