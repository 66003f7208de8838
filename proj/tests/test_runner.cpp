#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qlink/runner.hpp"
#include "qlink/scenario.hpp"

using namespace qlink;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json bundled(const std::string& name) { return json::parse(slurp(fs::path(QLINK_SCENARIO_DIR) / name)); }

Scenario scenario_from(const json& j) { return parse_scenario(j.dump(2)); }

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("qlink_test_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("bundled scenarios load") {
    for (const auto& e : fs::directory_iterator(QLINK_SCENARIO_DIR)) {
        CAPTURE(e.path().string());
        CHECK_NOTHROW(load_scenario(e.path()));
    }
}

TEST_CASE("unknown keys are rejected with their path") {
    json j = bundled("link_budget.json");
    j["link"]["split_extinction"] = 20.0;
    try {
        scenario_from(j);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("link.split_extinction") != std::string::npos);
    }
    json top = bundled("link_budget.json");
    top["sead"] = 1;
    CHECK_THROWS_AS(scenario_from(top), ConfigError);
}

TEST_CASE("invalid values are rejected") {
    const json base = bundled("link_budget.json");
    auto rejects = [&](const char* section, const char* key, json value) {
        json j = base;
        j[section][key] = value;
        CAPTURE(key);
        CHECK_THROWS_AS(scenario_from(j), ConfigError);
    };
    rejects("tomography", "n_rounds", 0);
    rejects("tomography", "mc_trials", 1);
    rejects("tomography", "acquisition_s", -1.0);
    rejects("link", "fbs_imbalance", 0.9);
    rejects("link", "delay_length_m", 30.0);
    rejects("strain", "dwell_s", 0.0);
    rejects("source", "visibility", 1.5);
    rejects("source", "pair_rate_hz", "fast");
    CHECK_THROWS_AS(parse_scenario("[1, 2]"), ConfigError);
    CHECK_THROWS_AS(parse_scenario("{ not json"), ConfigError);
    CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), IoError);
}

TEST_CASE("infinite extinction is spelled as a string") {
    const Scenario s = load_scenario(fs::path(QLINK_SCENARIO_DIR) / "ideal.json");
    CHECK(std::isinf(s.link.fpbs_extinction_db[0]));
}

TEST_CASE("content hash tracks the file text") {
    const std::string a = slurp(fs::path(QLINK_SCENARIO_DIR) / "link_budget.json");
    std::string b = a;
    CHECK(content_hash(a) == content_hash(b));
    b += " ";
    CHECK(content_hash(a) != content_hash(b));
    CHECK(content_hash("").size() == 16);
    CHECK(content_hash("") == "cbf29ce484222325");
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
}

TEST_CASE("format_double is shortest round-trip") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(4.333) == "4.333");
    const double x = 1.0 / 3.0;
    CHECK(std::stod(format_double(x)) == x);
}

TEST_CASE("empty output trees are refused and leave nothing behind") {
    const fs::path dir = scratch("empty");
    CHECK_THROWS_AS(OutputTree{}.commit(dir), IoError);
    CHECK_FALSE(fs::exists(dir));
    for (const auto& e : fs::directory_iterator(dir.parent_path()))
        CHECK(e.path().filename().string().find("qlink_test_empty.partial") == std::string::npos);
}

TEST_CASE("commit replaces the previous tree") {
    const fs::path dir = scratch("replace");
    OutputTree first;
    first.add("a.txt", "one");
    first.add("stale.txt", "x");
    first.commit(dir);
    OutputTree second;
    second.add("a.txt", "two");
    second.commit(dir);
    CHECK(slurp(dir / "a.txt") == "two");
    CHECK_FALSE(fs::exists(dir / "stale.txt"));
    for (const auto& e : fs::directory_iterator(dir.parent_path())) {
        const std::string n = e.path().filename().string();
        CHECK(n.find(".qlink_test_replace") == std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("output names are validated") {
    OutputTree t;
    CHECK_THROWS(t.add("../escape.txt", "x"));
    CHECK_THROWS(t.add("", "x"));
}

TEST_CASE("counts CSV round-trips bit for bit") {
    Scenario s = load_scenario(fs::path(QLINK_SCENARIO_DIR) / "link_budget.json");
    s.tomography.n_rounds = 3;
    s.tomography.mc_trials = 10;
    const SweepReport rep = run_interconversion_sweep(s);
    const std::string csv = counts_csv(rep.records);
    const auto back = parse_counts_csv(csv);
    CHECK(counts_csv(back) == csv);
    const RoundAnalysis ra = analyze_rounds(back, s.seed, 10, true, std::nullopt);
    REQUIRE(ra.rounds.size() == rep.rounds.size());
    for (std::size_t r = 0; r < ra.rounds.size(); ++r) {
        CHECK(round_json(ra.rounds[r]) == round_json(rep.rounds[r]));
        CHECK(ra.rounds[r].tomo.fidelity == rep.rounds[r].tomo.fidelity);
    }
}

TEST_CASE("malformed CSV is a configuration error") {
    CHECK_THROWS_AS(parse_counts_csv("round,setting_s\n1,HH\n"), ConfigError);
    CHECK_THROWS_AS(parse_counts_csv(""), ConfigError);
    CHECK_THROWS_AS(read_counts_csv("/nonexistent/counts.csv"), IoError);
}

TEST_CASE("runs are deterministic for a fixed seed") {
    Scenario s = load_scenario(fs::path(QLINK_SCENARIO_DIR) / "link_budget.json");
    s.tomography.n_rounds = 2;
    s.tomography.mc_trials = 5;
    const RunInfo info{"sweep-interconvert", "link_budget.json"};
    const auto a = sweep_outputs(run_interconversion_sweep(s), nullptr, s, info).files();
    const auto b = sweep_outputs(run_interconversion_sweep(s), nullptr, s, info).files();
    CHECK(a == b);
    s.seed += 1;
    const auto c = sweep_outputs(run_interconversion_sweep(s), nullptr, s, info).files();
    CHECK(a.at("counts.csv") != c.at("counts.csv"));
}

TEST_CASE("schedule spans ten rounds of 36 settings") {
    Scenario s = load_scenario(fs::path(QLINK_SCENARIO_DIR) / "baseline.json");
    s.tomography.mc_trials = 0;
    const SweepReport rep = run_pol_baseline_sweep(s);
    CHECK(rep.records.size() == 360);
    CHECK(rep.simulated_seconds == doctest::Approx(360 * 4.333));
    CHECK(std::abs(rep.simulated_seconds - 26 * 60) < s.strain.schedule.dwell_s);
}

TEST_CASE("identity-paddle baseline matches the source fidelity") {
    json j = bundled("baseline.json");
    j["strain"]["max_deg"] = 0.0;
    j["strain"]["q2_deg"] = 0.0;
    j["tomography"]["n_rounds"] = 3;
    const Scenario s = scenario_from(j);
    const SweepReport rep = run_pol_baseline_sweep(s);
    const double werner = (1.0 + 3.0 * s.source.spec.visibility) / 4.0;
    for (const auto& r : rep.rounds) CHECK(std::abs(r.tomo.fidelity - werner) < 3.0 * r.tomo.fidelity_std);
}

TEST_CASE("ideal sweep keeps every round near unit fidelity") {
    Scenario s = load_scenario(fs::path(QLINK_SCENARIO_DIR) / "ideal.json");
    s.tomography.n_rounds = 2;
    const SweepReport rep = run_interconversion_sweep(s);
    for (const auto& r : rep.rounds) CHECK(r.tomo.fidelity >= 0.999);
}

TEST_CASE("manifest lists every data file") {
    Scenario s = load_scenario(fs::path(QLINK_SCENARIO_DIR) / "link_budget.json");
    s.tomography.n_rounds = 2;
    s.tomography.mc_trials = 0;
    const OutputTree t = sweep_outputs(run_interconversion_sweep(s), nullptr, s, {"sweep-interconvert", "x/link_budget.json"});
    const json m = json::parse(t.files().at("manifest.json"));
    CHECK(m["scenario"] == "link_budget.json");
    CHECK(m["scenario_hash"] == content_hash(s.text));
    CHECK(m["seed"] == s.seed);
    CHECK(m["files"].size() + 1 == t.files().size());
}
