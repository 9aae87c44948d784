#pragma once

// Security-policy data model: per-range access rules, the Correspondence
// Table that maps a bus address to the location of its policy, and the JSON
// policy loader.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "busfw/bus.hpp"

namespace busfw {

enum class AccessRight : std::uint8_t { NoAccess = 0, ReadOnly = 1, WriteOnly = 2, ReadWrite = 3 };

inline bool allows(AccessRight r, TxnKind kind) {
    if (kind == TxnKind::Read) return r == AccessRight::ReadOnly || r == AccessRight::ReadWrite;
    return r == AccessRight::WriteOnly || r == AccessRight::ReadWrite;
}

inline const char* to_string(AccessRight r) {
    switch (r) {
        case AccessRight::NoAccess: return "none";
        case AccessRight::ReadOnly: return "ro";
        case AccessRight::WriteOnly: return "wo";
        case AccessRight::ReadWrite: return "rw";
    }
    return "?";
}

inline AccessRight access_right_from_string(const std::string& s) {
    if (s == "none") return AccessRight::NoAccess;
    if (s == "ro") return AccessRight::ReadOnly;
    if (s == "wo") return AccessRight::WriteOnly;
    if (s == "rw") return AccessRight::ReadWrite;
    throw std::invalid_argument("unknown access right: " + s);
}

using AesKey = std::array<std::uint8_t, 16>;

// Security modes form a ladder of decreasing permissiveness. The overlay is
// applied at check time and never mutates stored policy words: intermediate
// mode strips the write right, quarantine strips everything.
enum class SecurityMode : std::uint8_t { Normal = 0, ReadOnlyIntermediate = 1, Quarantine = 2 };

inline const char* to_string(SecurityMode m) {
    switch (m) {
        case SecurityMode::Normal: return "normal";
        case SecurityMode::ReadOnlyIntermediate: return "read_only";
        case SecurityMode::Quarantine: return "quarantine";
    }
    return "?";
}

inline AccessRight apply_mode_overlay(SecurityMode mode, AccessRight stored) {
    switch (mode) {
        case SecurityMode::Normal: return stored;
        case SecurityMode::ReadOnlyIntermediate:
            return (stored == AccessRight::ReadOnly || stored == AccessRight::ReadWrite)
                       ? AccessRight::ReadOnly
                       : AccessRight::NoAccess;
        case SecurityMode::Quarantine: return AccessRight::NoAccess;
    }
    return AccessRight::NoAccess;
}

// One security rule. Covers the half-open byte range [range_low, range_high);
// rights are kept per master because the same slave can grant different
// rights to different processors. Policy id 0 is reserved: the table lookup
// uses location 0 as its not-found sentinel.
struct SecurityPolicy {
    std::uint32_t id = 0;
    std::uint64_t range_low = 0;
    std::uint64_t range_high = 0;
    std::map<std::string, AccessRight> rights;  // master name -> right
    std::uint32_t format = 4;                   // allowed transfer size in bytes: 1, 2 or 4
    bool cmode = false;                         // confidentiality
    bool imode = false;                         // integrity
    std::optional<AesKey> key;

    bool contains(std::uint64_t addr) const { return addr >= range_low && addr < range_high; }

    AccessRight right_for(const std::string& master) const {
        auto it = rights.find(master);
        return it == rights.end() ? AccessRight::NoAccess : it->second;
    }

    // Rights packed into the 32-bit word the update protocol rewrites:
    // 2 bits per master, in the given master ordering.
    std::uint32_t rights_word(const std::vector<std::string>& masters) const {
        std::uint32_t w = 0;
        for (std::size_t i = 0; i < masters.size() && i < 16; ++i)
            w |= static_cast<std::uint32_t>(right_for(masters[i])) << (2 * i);
        return w;
    }
    void apply_rights_word(std::uint32_t w, const std::vector<std::string>& masters) {
        for (std::size_t i = 0; i < masters.size() && i < 16; ++i)
            rights[masters[i]] = static_cast<AccessRight>((w >> (2 * i)) & 0x3u);
    }
};

struct PolicyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr std::uint32_t kPolicyNotFound = 0;

// Parallel range-match structure: each entry mirrors one comparator
// submodule holding (reg_low, reg_high, reg_out). The lookup walks every
// submodule and writes the matching location into its output register,
// which stays 0 when no interval contains the address.
class CorrespondenceTable {
public:
    struct Entry {
        std::uint64_t range_low = 0;
        std::uint64_t range_high = 0;  // exclusive
        std::uint32_t location = 0;    // nonzero policy location
    };

    explicit CorrespondenceTable(std::size_t capacity = 10) : capacity_(capacity) {}

    void add(std::uint64_t low, std::uint64_t high, std::uint32_t location) {
        if (location == kPolicyNotFound) throw PolicyError("policy location 0 is reserved");
        if (low >= high) throw PolicyError("empty address range");
        if (entries_.size() >= capacity_) throw PolicyError("correspondence table over capacity");
        for (const auto& e : entries_)
            if (low < e.range_high && e.range_low < high)
                throw PolicyError("overlapping address ranges in correspondence table");
        entries_.push_back(Entry{low, high, location});
    }

    // Address-to-location transcription. Returns kPolicyNotFound (0) when no
    // submodule interval contains the address; the caller raises nF.
    std::uint32_t lookup(std::uint64_t bus_addr) const {
        std::uint32_t bram_a = kPolicyNotFound;
        for (const auto& e : entries_)
            if (bus_addr >= e.range_low && bus_addr < e.range_high) bram_a = e.location;
        return bram_a;
    }

    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return entries_.size(); }

private:
    std::size_t capacity_;
    std::vector<Entry> entries_;
};

// The trusted policy memory of one firewall: policies indexed by location,
// a version counter bumped on every update, and the initial image used by a
// full system reset.
class PolicyStore {
public:
    std::uint32_t add(SecurityPolicy p) {
        if (p.id == 0) throw PolicyError("policy id 0 is reserved");
        if (p.range_low >= p.range_high) throw PolicyError("policy range must be non-empty");
        if ((p.cmode || p.imode) && !p.key)
            throw PolicyError("policy " + std::to_string(p.id) + " enables crypto but has no key");
        std::uint32_t location = static_cast<std::uint32_t>(policies_.size() + 1);
        policies_.push_back(std::move(p));
        return location;
    }

    const SecurityPolicy& at(std::uint32_t location) const { return policies_.at(location - 1); }
    SecurityPolicy& at(std::uint32_t location) { return policies_.at(location - 1); }
    std::size_t size() const { return policies_.size(); }
    std::uint64_t version() const { return version_; }
    void bump_version() { ++version_; }

    void snapshot_initial() { initial_ = policies_; }
    void restore_initial() {
        policies_ = initial_;
        ++version_;
    }
    const std::vector<SecurityPolicy>& policies() const { return policies_; }

private:
    std::vector<SecurityPolicy> policies_;
    std::vector<SecurityPolicy> initial_;
    std::uint64_t version_ = 1;
};

inline std::uint64_t parse_addr(const json& v, const char* what) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
        const auto n = v.get<std::int64_t>();
        if (n < 0) throw PolicyError(std::string("negative address for ") + what);
        return static_cast<std::uint64_t>(n);
    }
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        try {
            return std::stoull(s, nullptr, 0);
        } catch (const std::exception&) {
            throw PolicyError(std::string("bad address for ") + what + ": " + s);
        }
    }
    throw PolicyError(std::string("address for ") + what + " must be hex string or integer");
}

inline AesKey parse_key_hex(const std::string& hex) {
    if (hex.size() != 32) throw PolicyError("key must be 32 hex chars");
    AesKey k{};
    for (std::size_t i = 0; i < 16; ++i) {
        auto nib = [&](char c) -> std::uint8_t {
            if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
            if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
            if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
            throw PolicyError("key must be hex");
        };
        k[i] = static_cast<std::uint8_t>((nib(hex[2 * i]) << 4) | nib(hex[2 * i + 1]));
    }
    return k;
}

struct LoadedPolicies {
    CorrespondenceTable table;
    PolicyStore store;
};

inline SecurityPolicy policy_from_json(const json& obj) {
    SecurityPolicy p;
    if (!obj.contains("id")) throw PolicyError("policy missing id");
    p.id = obj.at("id").get<std::uint32_t>();
    p.range_low = parse_addr(obj.at("low"), "policy low");
    p.range_high = parse_addr(obj.at("high"), "policy high");
    if (obj.contains("rights"))
        for (auto it = obj.at("rights").begin(); it != obj.at("rights").end(); ++it)
            p.rights[it.key()] = access_right_from_string(it.value().get<std::string>());
    p.format = obj.value("format", 4u);
    if (p.format != 1 && p.format != 2 && p.format != 4)
        throw PolicyError("policy " + std::to_string(p.id) + ": format must be 1, 2 or 4 bytes");
    p.cmode = obj.value("cmode", false);
    p.imode = obj.value("imode", false);
    if (obj.contains("key")) p.key = parse_key_hex(obj.at("key").get<std::string>());
    if ((p.cmode || p.imode) && !p.key)
        throw PolicyError("policy " + std::to_string(p.id) + " enables crypto but has no key");
    return p;
}

// Builds a correspondence table plus policy store from a policy document
// (a JSON array of policy objects). Rejects overlaps, id 0, missing keys
// and over-capacity tables at load time.
inline LoadedPolicies load_policies(const json& doc, std::size_t capacity = 10) {
    LoadedPolicies out{CorrespondenceTable(capacity), PolicyStore{}};
    if (!doc.is_array()) throw PolicyError("policy document must be a JSON array");
    for (const auto& obj : doc) {
        SecurityPolicy p = policy_from_json(obj);
        for (const auto& q : out.store.policies())
            if (q.id == p.id) throw PolicyError("duplicate policy id " + std::to_string(p.id));
        std::uint32_t loc = out.store.add(p);
        out.table.add(p.range_low, p.range_high, loc);
    }
    out.store.snapshot_initial();
    return out;
}

}  // namespace busfw
