#include "qlink/scenario.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace qlink {

namespace {

using nlohmann::json;

// Reads keys from one JSON object and reports any it was never asked for.
class Section {
  public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError((path_.empty() ? "scenario" : path_) + ": expected an object");
    }

    double number(const char* key, double fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        const json& v = j_.at(key);
        if (v.is_string() && v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
        if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
        return v.get<double>();
    }

    std::int64_t integer(const char* key, std::int64_t fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
        return v.get<std::int64_t>();
    }

    std::uint64_t unsigned_integer(const char* key, std::uint64_t fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number_unsigned()) throw ConfigError(where(key) + ": expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const char* key, bool fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_boolean()) throw ConfigError(where(key) + ": expected true or false");
        return v.get<bool>();
    }

    std::string string(const char* key, const std::string& fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
        return v.get<std::string>();
    }

    // Nested object, or nullptr when absent.
    const json* object(const char* key) {
        seen_.insert(key);
        if (!j_.contains(key)) return nullptr;
        return &j_.at(key);
    }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (!seen_.count(item.key())) throw ConfigError("unknown key '" + where(item.key()) + "'");
        }
    }

  private:
    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void parse_source(const json& j, SourceParams& s) {
    Section sec(j, "source");
    s.spec.visibility = sec.number("visibility", s.spec.visibility);
    s.spec.phase_rad = deg2rad(sec.number("phase_deg", rad2deg(s.spec.phase_rad)));
    s.spec.balance = sec.number("balance", s.spec.balance);
    s.pair_rate_hz = sec.number("pair_rate_hz", s.pair_rate_hz);
    s.singles_s_hz = sec.number("singles_signal_hz", s.singles_s_hz);
    s.singles_i_hz = sec.number("singles_idler_hz", s.singles_i_hz);
    s.window_ns = sec.number("coincidence_window_ns", s.window_ns);
    sec.finish();
}

void parse_link(const json& j, LinkConfig& c) {
    Section sec(j, "link");
    c.timebin_separation_ns = sec.number("timebin_separation_ns", c.timebin_separation_ns);
    c.delay_length_m = sec.number("delay_length_m", c.delay_length_m);
    c.fpbs_extinction_db[0] = sec.number("split_extinction_db", c.fpbs_extinction_db[0]);
    c.fpbs_extinction_db[1] = sec.number("cleanup_extinction_db", c.fpbs_extinction_db[1]);
    c.fpbs_extinction_db[2] = sec.number("combine_extinction_db", c.fpbs_extinction_db[2]);
    c.fbs_imbalance = sec.number("fbs_imbalance", c.fbs_imbalance);
    c.pdl_imbalance_db = sec.number("pdl_imbalance_db", c.pdl_imbalance_db);
    c.phase_sigma_deg[0] = sec.number("amzi1_phase_sigma_deg", c.phase_sigma_deg[0]);
    c.phase_sigma_deg[1] = sec.number("amzi2_phase_sigma_deg", c.phase_sigma_deg[1]);
    c.amzi_phase_deg[0] = sec.number("amzi1_phase_deg", c.amzi_phase_deg[0]);
    c.amzi_phase_deg[1] = sec.number("amzi2_phase_deg", c.amzi_phase_deg[1]);
    c.temporal_mismatch_ps = sec.number("temporal_mismatch_ps", c.temporal_mismatch_ps);
    c.wavepacket_sigma_ps = sec.number("wavepacket_sigma_ps", c.wavepacket_sigma_ps);
    c.module_insertion_loss_db[0] = sec.number("pol_to_tb_insertion_loss_db", c.module_insertion_loss_db[0]);
    c.module_insertion_loss_db[1] = sec.number("tb_to_pol_insertion_loss_db", c.module_insertion_loss_db[1]);
    sec.finish();
}

void parse_strain(const json& j, StrainParams& s) {
    Section sec(j, "strain");
    s.schedule.step_deg = sec.number("step_deg", s.schedule.step_deg);
    s.schedule.dwell_s = sec.number("dwell_s", s.schedule.dwell_s);
    s.schedule.max_deg = sec.number("max_deg", s.schedule.max_deg);
    s.schedule.start_deg = sec.number("start_deg", s.schedule.start_deg);
    s.q1_deg = sec.number("q1_deg", s.q1_deg);
    s.q2_deg = sec.number("q2_deg", s.q2_deg);
    sec.finish();
}

int checked_int(std::int64_t v, const char* what) {
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
        throw ConfigError(std::string(what) + ": out of range");
    }
    return static_cast<int>(v);
}

void parse_tomography(const json& j, TomographyPlan& t) {
    Section sec(j, "tomography");
    t.n_rounds = checked_int(sec.integer("n_rounds", t.n_rounds), "tomography.n_rounds");
    t.acquisition_s = sec.number("acquisition_s", t.acquisition_s);
    t.mc_trials = checked_int(sec.integer("mc_trials", t.mc_trials), "tomography.mc_trials");
    t.subtract_accidentals = sec.boolean("subtract_accidentals", t.subtract_accidentals);
    sec.finish();
}

void parse_chsh(const json& j, ChshPlan& c) {
    Section sec(j, "chsh");
    c.angles.a_deg = sec.number("a_deg", c.angles.a_deg);
    c.angles.a2_deg = sec.number("a2_deg", c.angles.a2_deg);
    c.angles.b_deg = sec.number("b_deg", c.angles.b_deg);
    c.angles.b2_deg = sec.number("b2_deg", c.angles.b2_deg);
    c.repeats = checked_int(sec.integer("repeats", c.repeats), "chsh.repeats");
    c.acquisition_s = sec.number("acquisition_s", c.acquisition_s);
    c.fringe_step_deg = sec.number("fringe_step_deg", c.fringe_step_deg);
    sec.finish();
}

void parse_detectors(const json& j, DetectorParams& d) {
    Section sec(j, "detectors");
    d.efficiencies.signal_transmit = sec.number("eff_signal_transmit", d.efficiencies.signal_transmit);
    d.efficiencies.signal_reflect = sec.number("eff_signal_reflect", d.efficiencies.signal_reflect);
    d.efficiencies.idler_transmit = sec.number("eff_idler_transmit", d.efficiencies.idler_transmit);
    d.efficiencies.idler_reflect = sec.number("eff_idler_reflect", d.efficiencies.idler_reflect);
    d.jitter_ps = sec.number("jitter_ps", d.jitter_ps);
    d.histogram_bin_ps = sec.number("histogram_bin_ps", d.histogram_bin_ps);
    d.histogram_events = sec.unsigned_integer("histogram_events", d.histogram_events);
    sec.finish();
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

}  // namespace

void Scenario::validate() const {
    require(!name.empty(), "name: must not be empty");
    require(!output_dir.empty(), "output_dir: must not be empty");

    const auto& s = source;
    require(s.spec.visibility >= 0.0 && s.spec.visibility <= 1.0, "source.visibility: must be in [0, 1]");
    require(std::isfinite(s.spec.phase_rad), "source.phase_deg: must be finite");
    require(s.spec.balance >= 0.0 && s.spec.balance <= 1.0, "source.balance: must be in [0, 1]");
    require(finite_nonneg(s.pair_rate_hz), "source.pair_rate_hz: must be finite and >= 0");
    require(finite_nonneg(s.singles_s_hz), "source.singles_signal_hz: must be finite and >= 0");
    require(finite_nonneg(s.singles_i_hz), "source.singles_idler_hz: must be finite and >= 0");
    require(finite_nonneg(s.window_ns), "source.coincidence_window_ns: must be finite and >= 0");

    try {
        link.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("link: ") + e.what());
    }
    try {
        strain.schedule.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("strain: ") + e.what());
    }
    require(std::isfinite(strain.q1_deg) && std::isfinite(strain.q2_deg), "strain: paddle angles must be finite");

    require(tomography.n_rounds >= 1, "tomography.n_rounds: must be >= 1");
    require(std::isfinite(tomography.acquisition_s) && tomography.acquisition_s > 0.0,
            "tomography.acquisition_s: must be > 0");
    require(tomography.mc_trials == 0 || tomography.mc_trials >= 2, "tomography.mc_trials: must be 0 or >= 2");

    require(std::isfinite(chsh.angles.a_deg) && std::isfinite(chsh.angles.a2_deg) && std::isfinite(chsh.angles.b_deg) &&
                std::isfinite(chsh.angles.b2_deg),
            "chsh: angles must be finite");
    require(chsh.repeats >= 1, "chsh.repeats: must be >= 1");
    require(std::isfinite(chsh.acquisition_s) && chsh.acquisition_s > 0.0, "chsh.acquisition_s: must be > 0");
    require(std::isfinite(chsh.fringe_step_deg) && chsh.fringe_step_deg > 0.0 && chsh.fringe_step_deg <= 30.0,
            "chsh.fringe_step_deg: must be in (0, 30]");

    const auto& e = detectors.efficiencies;
    for (double x : {e.signal_transmit, e.signal_reflect, e.idler_transmit, e.idler_reflect}) {
        require(x >= 0.0 && x <= 1.0, "detectors: efficiencies must be in [0, 1]");
    }
    require(finite_nonneg(detectors.jitter_ps), "detectors.jitter_ps: must be finite and >= 0");
    require(std::isfinite(detectors.histogram_bin_ps) && detectors.histogram_bin_ps > 0.0,
            "detectors.histogram_bin_ps: must be > 0");
}

Scenario parse_scenario(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
    }

    Scenario scn;
    scn.text = json_text;
    Section top(root, "");
    scn.name = top.string("name", scn.name);
    scn.seed = top.unsigned_integer("seed", scn.seed);
    scn.output_dir = top.string("output_dir", scn.output_dir);
    if (const json* j = top.object("source")) parse_source(*j, scn.source);
    if (const json* j = top.object("link")) parse_link(*j, scn.link);
    if (const json* j = top.object("strain")) parse_strain(*j, scn.strain);
    if (const json* j = top.object("tomography")) parse_tomography(*j, scn.tomography);
    if (const json* j = top.object("chsh")) parse_chsh(*j, scn.chsh);
    if (const json* j = top.object("detectors")) parse_detectors(*j, scn.detectors);
    top.finish();

    scn.validate();
    return scn;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open scenario file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("failed reading scenario file " + path.string());
    try {
        return parse_scenario(buf.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string content_hash(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = hex[h & 0xF];
        h >>= 4;
    }
    return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    // splitmix64 finalizer over the pair
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace qlink
