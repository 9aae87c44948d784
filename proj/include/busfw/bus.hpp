#pragma once

// Core bus-level types shared by every component: AXI-like transactions,
// per-transaction cycle ledgers, firewall error flags and the event log.

#include <cstdint>
#include <deque>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace busfw {

using json = nlohmann::ordered_json;

enum class TxnKind { Read, Write };

inline const char* to_string(TxnKind k) { return k == TxnKind::Read ? "read" : "write"; }

// One AXI-like bus operation. The transfer id follows the ARID convention
// used by the checking datapath: nonzero id = read, zero id = write.
struct Transaction {
    std::uint64_t seq = 0;      // unique per simulation, used as the log id
    std::uint32_t master = 0;   // master index in topology order
    std::uint64_t txn_id = 0;   // ARID-style id: nonzero <=> read
    std::uint64_t address = 0;
    std::uint32_t size = 4;     // transfer size field, bytes per beat
    std::vector<std::uint32_t> payload;
    TxnKind kind = TxnKind::Write;

    std::uint32_t words() const { return static_cast<std::uint32_t>(payload.size()); }

    static Transaction make_write(std::uint64_t seq, std::uint32_t master, std::uint64_t addr,
                                  std::vector<std::uint32_t> data, std::uint32_t size = 4) {
        Transaction t;
        t.seq = seq;
        t.master = master;
        t.txn_id = 0;
        t.address = addr;
        t.size = size;
        t.payload = std::move(data);
        t.kind = TxnKind::Write;
        return t;
    }

    static Transaction make_read(std::uint64_t seq, std::uint32_t master, std::uint64_t addr,
                                 std::uint32_t words, std::uint32_t size = 4) {
        Transaction t;
        t.seq = seq;
        t.master = master;
        t.txn_id = seq + 1;  // nonzero
        t.address = addr;
        t.size = size;
        t.payload.assign(words, 0);
        t.kind = TxnKind::Read;
        return t;
    }
};

// Per-transaction breakdown of cycles spent in each firewall pipeline stage.
// total() is always the sum of the stages; raw bus transfer cycles are
// accounted separately by the kernel.
struct CycleLedger {
    std::uint64_t interface = 0;     // decision + synchronization (+ manager roundtrip when centralized)
    std::uint64_t table_lookup = 0;  // Addr state
    std::uint64_t policy_read = 0;   // Par state
    std::uint64_t check = 0;         // Chk state
    std::uint64_t crypto = 0;
    std::uint64_t update_stall = 0;  // cycles spent waiting on a frozen interface

    std::uint64_t total() const {
        return interface + table_lookup + policy_read + check + crypto + update_stall;
    }
    // The "security policy checking" share: everything but crypto and stalls.
    std::uint64_t check_total() const { return interface + table_lookup + policy_read + check; }

    CycleLedger& operator+=(const CycleLedger& o) {
        interface += o.interface;
        table_lookup += o.table_lookup;
        policy_read += o.policy_read;
        check += o.check;
        crypto += o.crypto;
        update_stall += o.update_stall;
        return *this;
    }

    json to_json() const {
        return json{{"interface", interface}, {"table_lookup", table_lookup},
                    {"policy_read", policy_read}, {"check", check},
                    {"crypto", crypto},          {"update_stall", update_stall},
                    {"total", total()}};
    }
};

// The three firewall error flags plus the reporting firewall's identity.
struct FlagSet {
    bool cf = false;  // check failed (rights or format)
    bool nf = false;  // address not found in the correspondence table
    bool af = false;  // authentication failed
    std::uint32_t firewall_id = 0;

    bool any() const { return cf || nf || af; }

    std::string to_string() const {
        std::string s;
        if (cf) s += "cF";
        if (nf) s += s.empty() ? "nF" : "+nF";
        if (af) s += s.empty() ? "aF" : "+aF";
        return s.empty() ? "none" : s;
    }
};

// AXI-style handshake bits for one firewall interface. Data moves across the
// interface only in cycles where both valid and ready are high; a frozen
// interface holds its outgoing ready signals low.
struct HandshakeState {
    bool arready_out = true;
    bool awready_out = true;
    bool rvalid = false;
    bool wvalid = false;

    void set_frozen(bool frozen) {
        arready_out = !frozen;
        awready_out = !frozen;
    }
    bool accepts(TxnKind kind) const {
        return kind == TxnKind::Read ? arready_out : awready_out;
    }
};

struct Event {
    std::uint64_t cycle = 0;
    std::string component;
    std::string kind;
    std::uint64_t txn = 0;  // 0 = not transaction-related
    json detail;
};

class EventLog {
public:
    void emit(std::uint64_t cycle, std::string component, std::string kind, std::uint64_t txn,
              json detail = json::object()) {
        events_.push_back(Event{cycle, std::move(component), std::move(kind), txn, std::move(detail)});
    }

    const std::vector<Event>& events() const { return events_; }
    std::size_t size() const { return events_.size(); }

    std::vector<const Event*> of_kind(const std::string& kind) const {
        std::vector<const Event*> out;
        for (const auto& e : events_)
            if (e.kind == kind) out.push_back(&e);
        return out;
    }

    // JSON-lines, one record per event.
    std::string to_jsonl() const {
        std::ostringstream os;
        for (const auto& e : events_) {
            json rec{{"cycle", e.cycle}, {"component", e.component}, {"kind", e.kind}, {"txn", e.txn}};
            if (!e.detail.empty()) rec["detail"] = e.detail;
            os << rec.dump() << '\n';
        }
        return os.str();
    }

private:
    std::vector<Event> events_;
};

}  // namespace busfw
