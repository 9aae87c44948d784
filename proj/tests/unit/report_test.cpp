#include <doctest.h>

#include "busfw/report.hpp"

using namespace busfw;

TEST_CASE("latency scenarios report their headline totals") {
    ScenarioOptions opt;
    opt.canonical = true;
    CHECK(run_scenario("s0-latency", opt).total == 6);
    CHECK(run_scenario("s1-latency", opt).total == 12);
    auto s2 = run_scenario("s2-latency", opt);
    CHECK(s2.total == 28);
    CHECK(s2.ledger_sum.check_total() == 6);
    CHECK(s2.ledger_sum.crypto == 22);
    CHECK(run_scenario("s3-latency", opt).total == 18);
    CHECK(run_scenario("s4-latency", opt).total == 6);
    // bar ordering: plaintext < integrity-only < conf+int
    CHECK(*run_scenario("s4-latency", opt).total < *run_scenario("s3-latency", opt).total);
    CHECK(*run_scenario("s3-latency", opt).total < *run_scenario("s2-latency", opt).total);
}

TEST_CASE("identical invocations emit byte-identical canonical reports") {
    ScenarioOptions opt;
    opt.canonical = true;
    for (const char* name : {"s2-latency", "attack-a1", "case-study-picdrm"}) {
        const auto a = run_scenario(name, opt).to_json(true).dump(2);
        const auto b = run_scenario(name, opt).to_json(true).dump(2);
        CHECK(a == b);
    }
}

TEST_CASE("every built-in scenario runs with its assertions green") {
    ScenarioOptions opt;
    opt.canonical = true;
    opt.scale = 0.25;
    for (const auto& name : scenario_names()) {
        ScenarioOptions o = opt;
        if (name == "compare-centralized" || name == "case-study-picdec") o.scale = 1.0;
        const auto rep = run_scenario(name, o);
        INFO(name);
        CHECK(rep.all_assertions_pass());
        CHECK(rep.exit_code != 1);
    }
}

TEST_CASE("unknown scenario is rejected") {
    CHECK_THROWS(run_scenario("not-a-scenario"));
}

TEST_CASE("report totals cross-check against event-log charges") {
    ScenarioOptions opt;
    for (const char* name : {"s2-latency", "case-study-picproc"}) {
        const auto rep = run_scenario(name, opt);
        bool found = false;
        for (const auto& [n, ok] : rep.assertions)
            if (n == "ledger_event_consistency") {
                found = true;
                CHECK(ok);
            }
        CHECK(found);
    }
}

TEST_CASE("file-driven run honors topology constants") {
    json topo = {
        {"constants", {{"software_latency", 20}, {"raw_hop_cost", 2}}},
        {"masters", json::array({{{"name", "MB1"}}})},
        {"slaves", json::array({{{"name", "ram"}, {"low", "0x1000"}, {"high", "0x2000"}}})},
        {"firewalls",
         json::array({{{"name", "fw_ram"}, {"id", 1}, {"kind", "local"}, {"guards", "ram"}}})}};
    json policies = json::array(
        {{{"id", 1}, {"low", "0x1000"}, {"high", "0x2000"}, {"rights", {{"MB1", "rw"}}}}});
    json trace = {{"ops", json::array({{{"master", "MB1"},
                                        {"kind", "write"},
                                        {"addr", "0x1000"},
                                        {"data", json::array({1, 2})}}})}};
    ScenarioOptions opt;
    const auto rep = run_files(topo, policies, trace, opt);
    CHECK(rep.exit_code == 0);
    REQUIRE(rep.transactions.size() == 1);
    CHECK(rep.transactions[0].ledger.total() == 10);  // 2 + 4*2
    CHECK(rep.transactions[0].bus_cycles == 4);       // 2 words x hop cost 2
}

TEST_CASE("memory dump covers exactly the populated external blocks") {
    ScenarioOptions opt;
    opt.dump_memory = true;
    const auto rep = run_scenario("s2-latency", opt);
    CHECK(!rep.memory_dump.empty());
    CHECK(rep.memory_dump.find("82000000:") != std::string::npos);
}
