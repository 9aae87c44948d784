#pragma once

// Case-study system builder, application traces, attack injectors and the
// distributed-vs-centralized comparison.
//
// The modeled platform: two processors (MB1, MB2), an image-processing IP,
// a shared on-chip memory, and an external memory split into five 32 MB
// sections (C11/D11 ciphered+authenticated, D12 authenticated, C21/D21
// plaintext). Four Local Firewalls guard the masters and on-chip slaves; one
// Cryptographic Firewall guards the external memory controller.

#include <cstdint>
#include <string>
#include <vector>

#include "busfw/sim.hpp"

namespace busfw {
namespace casestudy {

constexpr std::uint64_t kSharedLow = 0x00010000, kSharedHigh = 0x00020000;
constexpr std::uint64_t kIpLow = 0x00030000, kIpHigh = 0x00031000;
constexpr std::uint64_t kSectionBytes = 32ull << 20;  // 32 MB each
constexpr std::uint64_t kC11 = 0x80000000;
constexpr std::uint64_t kD11 = kC11 + kSectionBytes;
constexpr std::uint64_t kD12 = kD11 + kSectionBytes;
constexpr std::uint64_t kC21 = kD12 + kSectionBytes;
constexpr std::uint64_t kD21 = kC21 + kSectionBytes;

// Marker bytes used as payload for the plaintext-leak scan.
constexpr std::uint32_t kMarkerWord = 0xdeadbeef;

}  // namespace casestudy

struct CaseStudy {
    Topology topology;
    json policies;
};

// Access rights and crypto options of the case study. With crypto disabled
// (the "without cryptographic services" analysis option) every external
// section is plaintext and the memory firewall behaves like a Local Firewall.
inline CaseStudy build_case_study(bool crypto_enabled = true) {
    using namespace casestudy;
    const char* key = "0f0e0d0c0b0a09080706050403020100";

    json policies = json::array();
    auto section = [&](int id, std::uint64_t low, json rights, bool cmode, bool imode) {
        json p = {{"id", id},       {"low", low},      {"high", low + kSectionBytes},
                  {"rights", rights}, {"format", 4}};
        if (crypto_enabled && (cmode || imode)) {
            p["cmode"] = cmode;
            p["imode"] = imode;
            p["key"] = key;
        }
        policies.push_back(p);
    };
    policies.push_back({{"id", 1},
                        {"low", kSharedLow},
                        {"high", kSharedHigh},
                        {"rights", {{"MB1", "ro"}, {"MB2", "rw"}}},
                        {"format", 4}});
    policies.push_back({{"id", 2},
                        {"low", kIpLow},
                        {"high", kIpHigh},
                        {"rights", {{"MB1", "rw"}, {"MB2", "wo"}}},
                        {"format", 4}});
    const json mb1_only = {{"MB1", "rw"}, {"MB2", "none"}};
    const json mb2_only = {{"MB1", "none"}, {"MB2", "rw"}};
    section(3, kC11, mb1_only, true, true);
    section(4, kD11, mb1_only, true, true);
    section(5, kD12, mb1_only, false, true);
    section(6, kC21, mb2_only, false, false);
    section(7, kD21, mb2_only, false, false);

    Topology t;
    t.masters = {{"MB1"}, {"MB2"}};
    t.slaves = {{"shared_mem", kSharedLow, kSharedHigh}, {"image_ip", kIpLow, kIpHigh}};
    Topology::External ext;
    ext.name = "ext_mem";
    const bool c = crypto_enabled;
    ext.sections = {{"C11", kC11, kC11 + kSectionBytes, c, c},
                    {"D11", kD11, kD11 + kSectionBytes, c, c},
                    {"D12", kD12, kD12 + kSectionBytes, false, c},
                    {"C21", kC21, kC21 + kSectionBytes, false, false},
                    {"D21", kD21, kD21 + kSectionBytes, false, false}};
    t.external = ext;
    t.firewalls = {{"fw_mb1", 1, "local", "MB1", false, {}},
                   {"fw_mb2", 2, "local", "MB2", false, {}},
                   {"fw_ip", 3, "local", "image_ip", false, {2}},
                   {"fw_shared", 4, "local", "shared_mem", false, {1}},
                   // the crypto firewall holds key material: critical
                   {"fw_ext", 5, "crypto", "ext_mem", true, {3, 4, 5, 6, 7}}};
    return CaseStudy{std::move(t), std::move(policies)};
}

// --- area model ------------------------------------------------------------

struct AreaEstimate {
    std::uint64_t slices = 0;
    std::uint64_t regs = 0;
    std::uint64_t luts = 0;

    AreaEstimate operator+(const AreaEstimate& o) const {
        return {slices + o.slices, regs + o.regs, luts + o.luts};
    }
    bool operator==(const AreaEstimate& o) const = default;
};

// Synthesis-cost model for x Local and y Cryptographic Firewalls.
inline AreaEstimate estimate_area(std::uint64_t x, std::uint64_t y) {
    return {138 * x + 1304 * y, 123 * x + 2161 * y, 293 * x + 2689 * y};
}

// --- application traces ------------------------------------------------------

namespace trace_detail {

inline TraceOp write(const std::string& master, std::uint64_t addr, std::vector<std::uint32_t> data,
                     std::uint64_t gap) {
    TraceOp op;
    op.master = master;
    op.gap = gap;
    op.kind = TxnKind::Write;
    op.addr = addr;
    op.data = std::move(data);
    op.words = static_cast<std::uint32_t>(op.data.size());
    return op;
}

inline TraceOp read(const std::string& master, std::uint64_t addr, std::uint32_t words,
                    std::uint64_t gap) {
    TraceOp op;
    op.master = master;
    op.gap = gap;
    op.kind = TxnKind::Read;
    op.addr = addr;
    op.words = words;
    return op;
}

// First word is the verbatim marker (scannable), the rest varied filler.
inline std::vector<std::uint32_t> marker_burst(std::uint32_t len, std::uint32_t salt) {
    std::vector<std::uint32_t> v{casestudy::kMarkerWord};
    for (std::uint32_t i = 1; i < len; ++i)
        v.push_back(casestudy::kMarkerWord ^ (salt * 0x9e3779b9u + i));
    return v;
}

inline std::uint32_t scaled(double scale, std::uint32_t base, std::uint32_t min = 1) {
    const auto n = static_cast<std::uint32_t>(base * scale + 0.5);
    return n < min ? min : n;
}

}  // namespace trace_detail

// Image-processing flow under the case-study rights: the ciphered picture is
// fetched from external memory by MB1 and pushed through the threshold IP;
// temporary data is staged in the shared BRAM by MB2 (the only core with
// write rights there) and re-read by MB1; MB2 writes the plaintext result
// back to external memory.
inline Trace make_picproc_trace(double scale = 1.0) {
    using namespace casestudy;
    using namespace trace_detail;
    Trace t;
    const std::uint32_t bursts = scaled(scale, 16, 2);  // 4-word bursts per phase

    // stage the ciphered source picture in D11
    for (std::uint32_t i = 0; i < bursts; ++i)
        t.ops.push_back(write("MB1", kD11 + 16ull * i, marker_burst(4, i), 4));
    // m_encryptPic: read + software decipher (modeled as compute gaps)
    for (std::uint32_t i = 0; i < bursts; ++i)
        t.ops.push_back(read("MB1", kD11 + 16ull * i, 4, 8));
    // temporary pictures staged in the shared BRAM, consumed by MB1
    for (std::uint32_t i = 0; i < bursts; ++i) {
        t.ops.push_back(write("MB2", kSharedLow + 16ull * i, marker_burst(4, 0x100 + i), 2));
        t.ops.push_back(read("MB1", kSharedLow + 16ull * i, 4, 2));
    }
    // threshold configuration, then the picture into the IP ingest register
    t.ops.push_back(write("MB1", kIpLow, {0x80u}, 2));
    for (std::uint32_t i = 0; i < bursts; ++i)
        t.ops.push_back(write("MB1", kIpLow + 0x100, marker_burst(4, 0x200 + i), 2));
    // m_processedPic lands in D21 in plaintext
    for (std::uint32_t i = 0; i < bursts; ++i)
        t.ops.push_back(write("MB2", kD21 + 16ull * i, marker_burst(4, 0x300 + i), 2));
    return t;
}

// DRM-rights check on the target image by one core while the other performs
// shared-memory traffic.
inline Trace make_picdrm_trace(double scale = 1.0) {
    using namespace casestudy;
    using namespace trace_detail;
    Trace t;
    const std::uint32_t rounds = scaled(scale, 12, 2);
    for (std::uint32_t i = 0; i < rounds; ++i)
        t.ops.push_back(write("MB1", kD12 + 16ull * i, marker_burst(4, 0x400 + i), 3));
    for (std::uint32_t i = 0; i < rounds; ++i) {
        t.ops.push_back(read("MB1", kD12 + 16ull * i, 4, 6));  // license blob, integrity checked
        t.ops.push_back(write("MB2", kSharedLow + 0x800 + 4ull * i, {0x1000u + i}, 3));
        t.ops.push_back(read("MB2", kSharedLow + 0x800 + 4ull * i, 1, 3));
    }
    return t;
}

// Software deciphering by a single core over plaintext external sections.
// Calibrated access mix: per 100 accesses, 41 one-word and 59 two-word reads,
// each 400 cycles apart in the unprotected system. Every access clears two
// local-equivalent checks (the core's firewall and the memory firewall), so
// per 100 accesses the distributed firewalls add 41*12 + 59*20 = 1672 cycles
// on a 40000-cycle base (4.18%) and a centralized manager adds 4 cycles per
// check on top (6.18%).
inline Trace make_picdec_trace(double scale = 1.0) {
    using namespace casestudy;
    using namespace trace_detail;
    Trace t;
    const std::uint32_t blocks = scaled(scale, 5, 1);  // repetitions of the 100-access pattern
    for (std::uint32_t b = 0; b < blocks; ++b) {
        const std::uint64_t base = kC21 + 0x1000ull * b;
        std::uint32_t one = 41, two = 59;
        std::uint64_t addr = base;
        // interleave deterministically: pattern of one 1-word read per two
        // 2-word reads until a bucket runs dry
        while (one + two > 0) {
            if (one > 0) {
                t.ops.push_back(read("MB2", addr, 1, 398));  // 398 + 1 raw + 1 = 400
                addr += 4;
                --one;
            }
            for (int k = 0; k < 2 && two > 0; ++k) {
                t.ops.push_back(read("MB2", addr, 2, 397));  // 397 + 2 raw + 1 = 400
                addr += 8;
                --two;
            }
        }
    }
    return t;
}

// --- attack scripts -----------------------------------------------------------

enum class AttackKind {
    A1MemoryTamper,   // mutate external memory behind the firewalls
    A2BusProbe,       // record (and optionally corrupt) off-chip words
    A3RogueMaster,    // hostile master with no firewall of its own
    S1PacketSwap,     // swap a plaintext packet's payload and next-address
    S2MaliciousIp     // rogue block impersonating the image-processing IP
};

struct AttackScript {
    AttackKind kind = AttackKind::A1MemoryTamper;
    std::uint64_t trigger_cycle = 0;
    std::uint64_t address = 0;
    std::uint32_t payload = 0;
};

inline void inject(const AttackScript& attack, Simulation& sim) {
    switch (attack.kind) {
        case AttackKind::A1MemoryTamper: {
            const auto addr = attack.address;
            const auto mask = attack.payload ? attack.payload : 0x1u;
            sim.at_cycle(attack.trigger_cycle, [addr, mask](Simulation& s) {
                if (auto* mem = s.external_memory()) mem->tamper_word(addr, mask);
            });
            break;
        }
        case AttackKind::A2BusProbe: {
            sim.enable_bus_probe();
            if (attack.payload) {
                const auto addr = attack.address;
                const auto mask = attack.payload;
                sim.at_cycle(attack.trigger_cycle, [addr, mask](Simulation& s) {
                    if (auto* mem = s.external_memory()) mem->tamper_word(addr, mask);
                });
            }
            break;
        }
        case AttackKind::A3RogueMaster: {
            const auto addr = attack.address;
            const auto word = attack.payload;
            sim.at_cycle(attack.trigger_cycle, [addr, word](Simulation& s) {
                const std::string name = "rogue_master";
                try {
                    s.master_index(name);
                } catch (const std::exception&) {
                    s.add_rogue_master(name);
                }
                TraceOp op;
                op.master = name;
                op.kind = TxnKind::Write;
                op.addr = addr;
                op.data = {word};
                op.words = 1;
                s.issue_at(s.cycle() + 1, op);
            });
            break;
        }
        case AttackKind::S1PacketSwap: {
            // replace a plaintext packet: noised image word, and the
            // next-packet address overwritten with attack.payload
            const auto addr = attack.address;
            const auto rogue_next = attack.payload;
            sim.at_cycle(attack.trigger_cycle, [addr, rogue_next](Simulation& s) {
                if (auto* mem = s.external_memory()) {
                    mem->tamper_word(addr, 0x0bad0badu);
                    mem->write_word(addr + 4, rogue_next);
                }
            });
            break;
        }
        case AttackKind::S2MaliciousIp: {
            const auto addr = attack.address;
            const auto word = attack.payload;
            sim.at_cycle(attack.trigger_cycle, [addr, word](Simulation& s) {
                const std::string name = "malicious_ip";
                try {
                    s.master_index(name);
                } catch (const std::exception&) {
                    s.add_rogue_master(name);
                }
                TraceOp op;
                op.master = name;
                op.kind = TxnKind::Write;
                op.addr = addr;
                op.data = {word};
                op.words = 1;
                s.issue_at(s.cycle() + 1, op);
            });
            break;
        }
    }
}

// --- distributed vs centralized -----------------------------------------------

struct ComparisonReport {
    std::uint64_t base_cycles = 0;
    std::uint64_t distributed_cycles = 0;
    std::uint64_t centralized_cycles = 0;
    std::uint64_t checks = 0;
    double distributed_overhead = 0;  // fraction
    double centralized_overhead = 0;
    double relative_gain = 0;  // (centralized - distributed) / centralized

    json to_json() const {
        return json{{"base_cycles", base_cycles},
                    {"distributed_cycles", distributed_cycles},
                    {"centralized_cycles", centralized_cycles},
                    {"checks", checks},
                    {"distributed_overhead_pct", distributed_overhead * 100.0},
                    {"centralized_overhead_pct", centralized_overhead * 100.0},
                    {"relative_gain_pct", relative_gain * 100.0}};
    }
};

inline std::uint64_t run_trace_cycles(const CaseStudy& cs, const Trace& trace, SimConfig cfg,
                                      std::uint64_t* checks = nullptr) {
    Simulation sim(cs.topology, cs.policies, cfg);
    sim.load_trace(trace);
    const std::uint64_t cycles = sim.run();
    if (checks) *checks = sim.checks_performed();
    return cycles;
}

// Runs the trace three ways: unprotected baseline, distributed firewalls,
// and the same checks routed through a centralized manager (4 extra cycles
// per checked transaction).
inline ComparisonReport run_comparison(const CaseStudy& cs, const Trace& trace, SimConfig cfg = {}) {
    ComparisonReport r;
    SimConfig base = cfg;
    base.firewalls_enabled = false;
    base.centralized = false;
    r.base_cycles = run_trace_cycles(cs, trace, base);

    SimConfig dist = cfg;
    dist.firewalls_enabled = true;
    dist.centralized = false;
    r.distributed_cycles = run_trace_cycles(cs, trace, dist, &r.checks);

    SimConfig cent = dist;
    cent.centralized = true;
    r.centralized_cycles = run_trace_cycles(cs, trace, cent);

    if (r.base_cycles > 0) {
        r.distributed_overhead =
            double(r.distributed_cycles - r.base_cycles) / double(r.base_cycles);
        r.centralized_overhead =
            double(r.centralized_cycles - r.base_cycles) / double(r.base_cycles);
    }
    if (r.centralized_overhead > 0)
        r.relative_gain =
            (r.centralized_overhead - r.distributed_overhead) / r.centralized_overhead;
    return r;
}

}  // namespace busfw
