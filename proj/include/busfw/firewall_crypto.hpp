#pragma once

// Cryptographic Firewall guarding the external memory controller: the same
// Security Builder as a Local Firewall plus the AES-GCM datapath, a trusted
// tag store and the modeled (untrusted) external memory.
//
// Datapath order differs by direction: writes are checked before they are
// protected and stored; reads are fetched and unprotected before the checking
// module sees them. Integrity tags cover 128-bit memory blocks and live in
// trusted on-chip storage together with the per-block write timestamp.

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "busfw/bus.hpp"
#include "busfw/firewall_local.hpp"
#include "busfw/gcm.hpp"
#include "busfw/policy.hpp"

namespace busfw {

struct MemorySection {
    std::string name;
    std::uint64_t low = 0;
    std::uint64_t high = 0;  // exclusive
    bool cmode = false;
    bool imode = false;

    bool contains(std::uint64_t addr) const { return addr >= low && addr < high; }
};

// Flat byte-addressed external memory, stored sparsely as 16-byte blocks.
// Untrusted by the threat model: the tamper API lets the attack harness
// mutate it behind the firewall's back.
class ExternalMemory {
public:
    static constexpr std::uint64_t kBlockBytes = 16;

    std::uint32_t read_word(std::uint64_t addr) const {
        auto it = blocks_.find(addr / kBlockBytes);
        if (it == blocks_.end()) return 0;
        return it->second[(addr % kBlockBytes) / 4];
    }

    void write_word(std::uint64_t addr, std::uint32_t value) {
        blocks_[addr / kBlockBytes][(addr % kBlockBytes) / 4] = value;
    }

    bool has_block(std::uint64_t block_index) const { return blocks_.count(block_index) != 0; }

    // Attack A1/A2: direct mutation bypassing every firewall.
    void tamper_word(std::uint64_t addr, std::uint32_t xor_mask) {
        blocks_[addr / kBlockBytes][(addr % kBlockBytes) / 4] ^= xor_mask;
    }

    // Byte scan for a marker pattern inside [low, high).
    bool contains_marker(std::uint64_t low, std::uint64_t high,
                         std::span<const std::uint8_t> marker) const {
        if (marker.empty()) return false;
        std::vector<std::uint8_t> bytes;
        for (const auto& [idx, words] : blocks_) {
            const std::uint64_t base = idx * kBlockBytes;
            if (base + kBlockBytes <= low || base >= high) continue;
            for (int w = 0; w < 4; ++w)
                for (int b = 3; b >= 0; --b)
                    bytes.push_back(static_cast<std::uint8_t>(words[w] >> (8 * b)));
        }
        if (bytes.size() < marker.size()) return false;
        for (std::size_t i = 0; i + marker.size() <= bytes.size(); ++i) {
            bool hit = true;
            for (std::size_t j = 0; j < marker.size(); ++j)
                if (bytes[i + j] != marker[j]) {
                    hit = false;
                    break;
                }
            if (hit) return true;
        }
        return false;
    }

    const std::map<std::uint64_t, std::array<std::uint32_t, 4>>& blocks() const { return blocks_; }

private:
    std::map<std::uint64_t, std::array<std::uint32_t, 4>> blocks_;
};

struct TagStoreFull : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Trusted on-chip storage: one 128-bit tag plus the write timestamp per
// protected 128-bit block. Capacity is a hard budget; overflowing it is an
// error, never a silent downgrade.
class TagStore {
public:
    struct Entry {
        Block128 tag{};
        std::uint64_t timestamp = 0;
    };

    explicit TagStore(std::uint64_t capacity_bits = 15'335'424) : capacity_bits_(capacity_bits) {}

    void put(std::uint64_t block_index, const Block128& tag, std::uint64_t timestamp) {
        const bool fresh = entries_.count(block_index) == 0;
        if (fresh && occupancy_bits() + 128 > capacity_bits_)
            throw TagStoreFull("tag store capacity exceeded (" + std::to_string(capacity_bits_) +
                               " bits)");
        entries_[block_index] = Entry{tag, timestamp};
    }

    std::optional<Entry> find(std::uint64_t block_index) const {
        auto it = entries_.find(block_index);
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    std::uint64_t occupancy_bits() const { return entries_.size() * 128; }
    std::uint64_t capacity_bits() const { return capacity_bits_; }
    std::size_t size() const { return entries_.size(); }

private:
    std::uint64_t capacity_bits_;
    std::map<std::uint64_t, Entry> entries_;
};

// 1:1 tag-to-data ratio: a 128-bit tag per 128-bit protected block.
inline std::uint64_t tag_budget_bytes(std::uint64_t protected_bytes) { return protected_bytes; }
inline std::uint64_t max_protectable_bytes(std::uint64_t capacity_bytes) { return capacity_bytes; }

class CryptoFirewall {
public:
    CryptoFirewall(FirewallConfig cfg, LoadedPolicies policies, std::vector<std::string> masters,
                   std::vector<MemorySection> sections, std::uint64_t tag_capacity_bits = 15'335'424,
                   std::uint32_t raw_word_cost = 1)
        : cfg_(std::move(cfg)),
          table_(std::move(policies.table)),
          store_(std::move(policies.store)),
          masters_(std::move(masters)),
          sections_(std::move(sections)),
          tags_(tag_capacity_bits),
          raw_word_cost_(raw_word_cost) {
        for (std::size_t i = 0; i < sections_.size(); ++i)
            for (std::size_t j = i + 1; j < sections_.size(); ++j) {
                const auto& a = sections_[i];
                const auto& b = sections_[j];
                if (a.low < b.high && b.low < a.high)
                    throw PolicyError("memory sections " + a.name + " and " + b.name + " overlap");
            }
    }

    const std::string& name() const { return cfg_.name; }
    std::uint32_t id() const { return cfg_.id; }
    bool critical() const { return cfg_.critical; }
    CorrespondenceTable& table() { return table_; }
    PolicyStore& store() { return store_; }
    const PolicyStore& store() const { return store_; }
    const std::vector<std::string>& masters() const { return masters_; }
    const std::vector<MemorySection>& sections() const { return sections_; }
    ExternalMemory& memory() { return memory_; }
    const ExternalMemory& memory() const { return memory_; }
    TagStore& tag_store() { return tags_; }
    const TagStore& tag_store() const { return tags_; }

    SecurityMode mode() const { return mode_; }
    void set_mode(SecurityMode m) { mode_ = m; }

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

    // Arrivals are latched on a clock edge: a transaction pushed during cycle
    // c is first considered for processing in cycle c + 1.
    void push(Transaction txn, std::uint64_t arrival_cycle = 0) {
        if (!handshake_.accepts(txn.kind)) ready_event_ = true;  // ready edge while frozen
        queue_.push_back(Pending{std::move(txn), 0, arrival_cycle});
    }

    bool busy() const { return job_.has_value() || !queue_.empty(); }

    std::optional<FwCompletion> step(std::uint64_t cycle, EventLog* log) {
        if (frozen_) {
            if (job_) job_->ledger.update_stall++;
            for (auto& p : queue_)
                if (p.arrival < cycle) p.stall++;
            return std::nullopt;
        }
        if (!job_ && !queue_.empty() && queue_.front().arrival < cycle) start_job(cycle, log);
        if (!job_) return std::nullopt;
        return advance(cycle, log);
    }

    FwCompletion process_write(Transaction txn, EventLog* log = nullptr, std::uint64_t start_cycle = 0) {
        return drive(std::move(txn), log, start_cycle);
    }
    FwCompletion process_read(Transaction txn, EventLog* log = nullptr, std::uint64_t start_cycle = 0) {
        return drive(std::move(txn), log, start_cycle);
    }

private:
    // Write plan:  [Mgr] Builder Iface Crypto Mem
    // Read plan:   [Mgr] PreResolve Mem Crypto Builder Iface
    enum class Phase : std::uint8_t { Mgr, PreResolve, Builder, Iface, Crypto, Mem, Fail };

    struct Pending {
        Transaction txn;
        std::uint64_t stall = 0;
        std::uint64_t arrival = 0;
    };

    struct Job {
        Transaction txn;
        CycleLedger ledger;
        std::uint64_t bus_cycles = 0;  // raw external-memory transfer time
        std::vector<Phase> plan;
        std::size_t phase = 0;
        std::uint32_t left = 0;  // cycles remaining in current phase
        FsmState fsm = FsmState::Idle;
        std::uint32_t word = 0;
        std::uint32_t policy_loc = kPolicyNotFound;
        std::uint64_t version_used = 0;
        bool done = false;
        FlagSet flags;
        CheckFailReason reason = CheckFailReason::None;
    };

    FirewallConfig cfg_;
    CorrespondenceTable table_;
    PolicyStore store_;
    std::vector<std::string> masters_;
    std::vector<MemorySection> sections_;
    ExternalMemory memory_;
    TagStore tags_;
    std::map<std::uint64_t, std::uint64_t> timestamps_;  // cmode-only blocks
    std::map<std::uint32_t, GcmContext> contexts_;       // per policy location
    std::uint32_t raw_word_cost_;
    SecurityMode mode_ = SecurityMode::Normal;

    bool frozen_ = false;
    bool recfg_en_ = false;
    bool ready_event_ = false;
    HandshakeState handshake_;

    std::deque<Pending> queue_;
    std::optional<Job> job_;

    FwCompletion drive(Transaction txn, EventLog* log, std::uint64_t start_cycle) {
        push(std::move(txn), start_cycle);
        std::uint64_t cycle = start_cycle + 1;
        while (true) {
            if (auto done = step(cycle, log)) return std::move(*done);
            ++cycle;
        }
    }

    GcmContext& context_for(std::uint32_t policy_loc) {
        auto it = contexts_.find(policy_loc);
        if (it != contexts_.end()) return it->second;
        const SecurityPolicy& p = store_.at(policy_loc);
        if (!p.key) throw PolicyError("policy " + std::to_string(p.id) + " has no key material");
        Block128 key{};
        std::copy(p.key->begin(), p.key->end(), key.begin());
        return contexts_.emplace(policy_loc, GcmContext(key)).first->second;
    }

    void start_job(std::uint64_t cycle, EventLog* log) {
        Pending p = std::move(queue_.front());
        queue_.pop_front();
        Job j;
        j.txn = std::move(p.txn);
        j.ledger.update_stall = p.stall;
        j.flags.firewall_id = cfg_.id;
        if (cfg_.centralized) j.plan.push_back(Phase::Mgr);
        if (j.txn.kind == TxnKind::Read)
            j.plan.insert(j.plan.end(),
                          {Phase::PreResolve, Phase::Mem, Phase::Crypto, Phase::Builder, Phase::Iface});
        else
            j.plan.insert(j.plan.end(), {Phase::Builder, Phase::Iface, Phase::Crypto, Phase::Mem});
        job_ = std::move(j);
        begin_phase(*job_, cycle, log);
    }

    std::uint32_t crypto_cycle_count(const Job& j) const {
        const SecurityPolicy& p = store_.at(j.policy_loc);
        return static_cast<std::uint32_t>(crypto_cycles(j.txn.words(), p.cmode, p.imode));
    }

    void begin_phase(Job& j, std::uint64_t cycle, EventLog* log) {
        switch (j.plan[j.phase]) {
            case Phase::Mgr: j.left = 4; break;
            case Phase::PreResolve:
                j.fsm = FsmState::Addr;
                j.left = 2;
                break;
            case Phase::Builder:
                // Reads already resolved word 0 before crypto; resume at Chk.
                if (j.txn.kind == TxnKind::Read) {
                    j.fsm = FsmState::Chk;
                    j.left = 2;
                } else {
                    j.fsm = FsmState::Addr;
                    j.left = 1;
                }
                break;
            case Phase::Iface: j.left = 2; break;
            case Phase::Crypto:
                j.left = crypto_cycle_count(j);
                if (j.left == 0) {
                    // Plaintext section: the module is bypassed in zero
                    // cycles, but a read still needs its words picked up.
                    if (j.txn.kind == TxnKind::Read) (void)apply_read_crypto(j, cycle, log);
                    next_phase(j, cycle, log);
                }
                break;
            case Phase::Mem: j.left = std::max<std::uint32_t>(1, j.txn.words() * raw_word_cost_); break;
            case Phase::Fail: j.left = 1; break;
        }
    }

    void next_phase(Job& j, std::uint64_t cycle, EventLog* log) {
        if (++j.phase < j.plan.size())
            begin_phase(j, cycle, log);
        else
            j.done = true;
    }

    void fail(Job& j, bool cf, bool nf, bool af, CheckFailReason reason) {
        j.flags.cf = cf;
        j.flags.nf = nf;
        j.flags.af = af;
        j.reason = reason;
        j.plan = {Phase::Fail};
        j.phase = 0;
        j.fsm = FsmState::Fail;
        j.left = 1;
    }

    std::optional<FwCompletion> advance(std::uint64_t cycle, EventLog* log) {
        Job& j = *job_;
        if (j.done) return finish(FwOutcome::Forward);

        switch (j.plan[j.phase]) {
            case Phase::Mgr:
                j.ledger.interface++;
                if (--j.left == 0) {
                    if (log)
                        log->emit(cycle, cfg_.name, "fw_manager_roundtrip", j.txn.seq,
                                  json{{"cycles", 4}});
                    next_phase(j, cycle, log);
                }
                break;

            case Phase::PreResolve:
                if (j.fsm == FsmState::Addr) {
                    j.ledger.table_lookup++;
                    j.policy_loc = table_.lookup(j.txn.address);
                    if (j.policy_loc == kPolicyNotFound) {
                        fail(j, false, true, false, CheckFailReason::None);
                        break;
                    }
                    j.fsm = FsmState::Par;
                    --j.left;
                } else {
                    j.ledger.policy_read++;
                    if (--j.left == 0) next_phase(j, cycle, log);
                }
                break;

            case Phase::Builder: step_builder(j, cycle, log); break;

            case Phase::Iface:
                j.ledger.interface++;
                if (--j.left == 0) next_phase(j, cycle, log);
                break;

            case Phase::Crypto:
                j.ledger.crypto++;
                if (--j.left == 0) {
                    if (j.txn.kind == TxnKind::Read) {
                        if (!apply_read_crypto(j, cycle, log)) break;  // rerouted to Fail
                    } else {
                        emit_crypto_event(j, cycle, log, "protect");
                    }
                    next_phase(j, cycle, log);
                }
                break;

            case Phase::Mem:
                j.bus_cycles++;
                if (--j.left == 0) {
                    if (j.txn.kind == TxnKind::Write && !commit_write(j)) break;
                    next_phase(j, cycle, log);
                }
                break;

            case Phase::Fail:
                if (--j.left == 0) {
                    if (log)
                        log->emit(cycle, cfg_.name, "fw_block", j.txn.seq,
                                  json{{"flags", j.flags.to_string()},
                                       {"reason", j.flags.af ? "auth"
                                                  : j.flags.nf ? "not_found"
                                                  : j.reason == CheckFailReason::Format ? "format"
                                                                                        : "rights"},
                                       {"policy_version", store_.version()}});
                    return finish(FwOutcome::Block);
                }
                break;
        }
        if (job_ && job_->done) return finish(FwOutcome::Forward);
        return std::nullopt;
    }

    void step_builder(Job& j, std::uint64_t cycle, EventLog* log) {
        switch (j.fsm) {
            case FsmState::Addr:
                j.ledger.table_lookup++;
                j.policy_loc = table_.lookup(word_address(j));
                if (j.policy_loc == kPolicyNotFound) {
                    fail(j, false, true, false, CheckFailReason::None);
                    return;
                }
                j.fsm = FsmState::Par;
                break;
            case FsmState::Par:
                j.ledger.policy_read++;
                j.fsm = FsmState::Chk;
                j.left = 2;
                break;
            case FsmState::Chk:
                j.ledger.check++;
                if (--j.left == 0) {
                    j.version_used = store_.version();
                    const CheckOutcome out =
                        check_word(j.txn, store_.at(j.policy_loc), master_name(j), mode_);
                    if (!out.check_out) {
                        fail(j, true, false, false, out.reason);
                        return;
                    }
                    if (j.word + 1 < j.txn.words()) {
                        ++j.word;
                        if (cfg_.strict_4n) {
                            j.fsm = FsmState::Addr;
                        } else {
                            j.fsm = FsmState::Chk;
                            j.left = 2;
                        }
                    } else {
                        if (log)
                            log->emit(cycle, cfg_.name, "fw_check", j.txn.seq,
                                      json{{"check_out", 1},
                                           {"words", j.txn.words()},
                                           {"policy_version", j.version_used},
                                           {"cycles", j.ledger.check_total() + 2}});
                        j.fsm = FsmState::Ok;
                        next_phase(j, cycle, log);
                    }
                }
                break;
            default: next_phase(j, cycle, log); break;
        }
    }

    std::uint64_t word_address(const Job& j) const {
        return j.txn.address + std::uint64_t(j.word) * j.txn.size;
    }

    const std::string& master_name(const Job& j) const {
        static const std::string unknown = "?";
        return j.txn.master < masters_.size() ? masters_[j.txn.master] : unknown;
    }

    void emit_crypto_event(const Job& j, std::uint64_t cycle, EventLog* log, const char* op) {
        if (!log) return;
        const SecurityPolicy& p = store_.at(j.policy_loc);
        log->emit(cycle, cfg_.name, "fw_crypto", j.txn.seq,
                  json{{"op", op},
                       {"words", j.txn.words()},
                       {"cmode", p.cmode},
                       {"imode", p.imode},
                       {"cycles", crypto_cycles(j.txn.words(), p.cmode, p.imode)}});
    }

    // --- functional memory + crypto --------------------------------------

    struct BlockSpan {
        std::uint64_t first = 0;
        std::uint64_t last = 0;  // inclusive block indices
    };

    BlockSpan touched_blocks(const Job& j) const {
        const std::uint64_t lo = j.txn.address;
        const std::uint64_t hi = j.txn.address + std::uint64_t(j.txn.words()) * 4 - 1;
        return {lo / ExternalMemory::kBlockBytes, hi / ExternalMemory::kBlockBytes};
    }

    // Protect and store every 16-byte block touched by the write. Partial
    // blocks are read-modify-write so the stored tag always covers the whole
    // block; a tamper detected by the RMW read fails the write with aF.
    // Returns false when rerouted to Fail.
    bool commit_write(Job& j) {
        const SecurityPolicy& p = store_.at(j.policy_loc);
        if (!p.cmode && !p.imode) {
            for (std::uint32_t w = 0; w < j.txn.words(); ++w)
                memory_.write_word(j.txn.address + 4ull * w, j.txn.payload[w]);
            return true;
        }
        GcmContext& ctx = context_for(j.policy_loc);
        const BlockSpan span = touched_blocks(j);
        for (std::uint64_t blk = span.first; blk <= span.last; ++blk) {
            const std::uint64_t base = blk * ExternalMemory::kBlockBytes;
            std::array<std::uint32_t, 4> plain{};
            const bool partial =
                base < j.txn.address ||
                base + ExternalMemory::kBlockBytes > j.txn.address + 4ull * j.txn.words();
            if (partial && memory_.has_block(blk)) {
                auto old = read_block_plaintext(j.policy_loc, blk);
                if (!old) {
                    fail(j, false, false, true, CheckFailReason::None);
                    return false;
                }
                plain = *old;
            }
            for (int w = 0; w < 4; ++w) {
                const std::uint64_t addr = base + 4ull * w;
                if (addr >= j.txn.address && addr < j.txn.address + 4ull * j.txn.words())
                    plain[w] = j.txn.payload[(addr - j.txn.address) / 4];
            }
            auto [prot, cycles] =
                gcm_protect(ctx, static_cast<std::uint32_t>(base),
                            std::span<const std::uint32_t>(plain.data(), 4), p.cmode, p.imode);
            (void)cycles;  // latency follows the transaction word count, not the RMW
            for (int w = 0; w < 4; ++w) memory_.write_word(base + 4ull * w, prot.ciphertext[w]);
            if (p.imode)
                tags_.put(blk, *prot.tag, prot.timestamp);
            else
                timestamps_[blk] = prot.timestamp;
        }
        return true;
    }

    std::optional<std::array<std::uint32_t, 4>> read_block_plaintext(std::uint32_t policy_loc,
                                                                     std::uint64_t blk) {
        const SecurityPolicy& p = store_.at(policy_loc);
        const std::uint64_t base = blk * ExternalMemory::kBlockBytes;
        ProtectedBlock stored;
        for (int w = 0; w < 4; ++w) stored.ciphertext.push_back(memory_.read_word(base + 4ull * w));
        if (p.imode) {
            const auto entry = tags_.find(blk);
            if (!entry) return std::nullopt;  // nothing vouches for this block
            stored.tag = entry->tag;
            stored.timestamp = entry->timestamp;
        } else {
            auto it = timestamps_.find(blk);
            stored.timestamp = it == timestamps_.end() ? 0 : it->second;
        }
        GcmContext& ctx = context_for(policy_loc);
        auto [res, cycles] =
            gcm_unprotect(ctx, static_cast<std::uint32_t>(base), stored, p.cmode, p.imode);
        (void)cycles;
        if (std::holds_alternative<AuthFailure>(res)) return std::nullopt;
        const auto& words = std::get<std::vector<std::uint32_t>>(res);
        std::array<std::uint32_t, 4> out{};
        std::copy(words.begin(), words.end(), out.begin());
        return out;
    }

    // Unprotect the fetched blocks and place the requested words into the
    // transaction payload. False = authentication failed (job now in Fail).
    bool apply_read_crypto(Job& j, std::uint64_t cycle, EventLog* log) {
        const SecurityPolicy& p = store_.at(j.policy_loc);
        const BlockSpan span = touched_blocks(j);
        std::vector<std::uint32_t> words;
        for (std::uint64_t blk = span.first; blk <= span.last; ++blk) {
            const std::uint64_t base = blk * ExternalMemory::kBlockBytes;
            if (!p.cmode && !p.imode) {
                for (int w = 0; w < 4; ++w) words.push_back(memory_.read_word(base + 4ull * w));
                continue;
            }
            auto plain = read_block_plaintext(j.policy_loc, blk);
            if (!plain) {
                emit_crypto_event(j, cycle, log, "unprotect");
                fail(j, false, false, true, CheckFailReason::None);
                return false;
            }
            for (int w = 0; w < 4; ++w) words.push_back((*plain)[w]);
        }
        if (p.cmode || p.imode) emit_crypto_event(j, cycle, log, "unprotect");
        const std::uint64_t first_base = span.first * ExternalMemory::kBlockBytes;
        for (std::uint32_t w = 0; w < j.txn.words(); ++w)
            j.txn.payload[w] = words[(j.txn.address + 4ull * w - first_base) / 4];
        return true;
    }

    std::optional<FwCompletion> finish(FwOutcome outcome) {
        FwCompletion done;
        done.txn = std::move(job_->txn);
        done.ledger = job_->ledger;
        done.outcome = outcome;
        done.flags = job_->flags;
        done.policy_version = job_->version_used ? job_->version_used : store_.version();
        done.bus_cycles = job_->bus_cycles;
        job_.reset();
        return done;
    }
};

}  // namespace busfw
