#include "refract/model_io.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace refract {

using nlohmann::json;

namespace {

const json& field(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) throw SchemaError(path + "." + key, "missing field");
    return j.at(key);
}

double number(const json& j, const std::string& key, const std::string& path) {
    const json& v = field(j, key, path);
    if (!v.is_number()) throw SchemaError(path + "." + key, "expected a number");
    return v.get<double>();
}

double number_or(const json& j, const std::string& key, double fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    return j.at(key).get<double>();
}

LevyModel parse_model(const json& j, const std::string& path) {
    const json& fam = field(j, "family", path);
    const std::string name = fam.get<std::string>();
    if (name == "brownian_drift") {
        return LevyModel::brownian(number(j, "gamma", path), number(j, "sigma", path));
    }
    if (name == "cramer_lundberg_exp") {
        return LevyModel::cramer_lundberg(number(j, "c", path), number(j, "lambda", path),
                                          number(j, "mu", path));
    }
    if (name == "general_numeric") {
        throw SchemaError(path + ".family",
                          "general_numeric models carry a density handle and are API-only");
    }
    throw SchemaError(path + ".family", "unknown family '" + name + "'");
}

json model_to_json(const LevyModel& m) {
    json j;
    switch (m.family) {
        case LevyFamily::brownian_drift:
            j["family"] = "brownian_drift";
            j["gamma"] = m.gamma;
            j["sigma"] = m.sigma;
            break;
        case LevyFamily::cramer_lundberg_exp:
            j["family"] = "cramer_lundberg_exp";
            j["c"] = m.gamma;
            j["lambda"] = m.jump_rate;
            j["mu"] = m.jump_mean_param;
            break;
        case LevyFamily::general_numeric:
            j["family"] = "general_numeric";
            break;
    }
    return j;
}

PayoffFunction parse_payoff(const json& j, const std::string& path) {
    const json& knots = field(j, "knots", path);
    const json& values = field(j, "values", path);
    if (!knots.is_array() || !values.is_array() || knots.size() != values.size()) {
        throw SchemaError(path, "knots/values must be arrays of equal length");
    }
    try {
        return PayoffFunction(knots.get<std::vector<double>>(), values.get<std::vector<double>>(),
                              number_or(j, "tail_slope", 0.0));
    } catch (const AssumptionError& e) {
        throw SchemaError(path, e.what());
    }
}

json payoff_to_json(const PayoffFunction& w) {
    json j;
    j["knots"] = w.knots();
    j["values"] = w.values();
    j["tail_slope"] = w.tail_slope();
    return j;
}

JumpLaw parse_jump(const json& j, const std::string& path) {
    if (j.is_null()) return JumpLaw::none();
    const std::string law = field(j, "law", path).get<std::string>();
    if (law == "zero") return JumpLaw::none();
    if (law == "point_mass") return JumpLaw::point(number(j, "m", path));
    if (law == "exponential") return JumpLaw::exponential(number(j, "eta", path));
    throw SchemaError(path + ".law", "unknown jump law '" + law + "'");
}

json jump_to_json(const JumpLaw& law) {
    json j;
    switch (law.kind) {
        case JumpLaw::Kind::zero: j["law"] = "zero"; break;
        case JumpLaw::Kind::point_mass:
            j["law"] = "point_mass";
            j["m"] = law.m;
            break;
        case JumpLaw::Kind::exponential:
            j["law"] = "exponential";
            j["eta"] = law.eta;
            break;
    }
    return j;
}

AuxiliaryProblem parse_single(const json& j, const std::string& path) {
    AuxiliaryProblem prob;
    prob.model = parse_model(field(j, "model", path), path + ".model");
    prob.delta = number(j, "delta", path);
    prob.beta = number(j, "beta", path);
    prob.q = number(j, "q", path);
    prob.r = number(j, "r", path);
    if (j.contains("payoff")) {
        prob.payoff = parse_payoff(j.at("payoff"), path + ".payoff");
    }
    return prob;
}

RegimeModel parse_regime(const json& j, const std::string& path) {
    RegimeModel rm;
    rm.beta = number(j, "beta", path);
    const json& states = field(j, "states", path);
    if (!states.is_array() || states.empty()) {
        throw SchemaError(path + ".states", "expected a non-empty array");
    }
    const std::size_t n = states.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::string sp = path + ".states[" + std::to_string(i) + "]";
        const json& s = states.at(i);
        rm.names.push_back(s.contains("name") ? s.at("name").get<std::string>() : "");
        rm.levy.push_back(parse_model(field(s, "model", sp), sp + ".model"));
        rm.delta.push_back(number(s, "delta", sp));
        rm.discount.push_back(number(s, "r", sp));
    }
    const json& Q = field(j, "Q", path);
    if (!Q.is_array() || Q.size() != n) {
        throw SchemaError(path + ".Q", "expected an n x n generator matrix");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const json& row = Q.at(i);
        if (!row.is_array() || row.size() != n) {
            throw SchemaError(path + ".Q[" + std::to_string(i) + "]", "wrong row length");
        }
        rm.Q.push_back(row.get<std::vector<double>>());
    }
    rm.switch_jumps.assign(n, std::vector<JumpLaw>(n));
    if (j.contains("jumps")) {
        const json& jumps = j.at("jumps");
        if (!jumps.is_array() || jumps.size() != n) {
            throw SchemaError(path + ".jumps", "expected an n x n array of jump laws");
        }
        for (std::size_t i = 0; i < n; ++i) {
            const json& row = jumps.at(i);
            if (!row.is_array() || row.size() != n) {
                throw SchemaError(path + ".jumps[" + std::to_string(i) + "]", "wrong row length");
            }
            for (std::size_t k = 0; k < n; ++k) {
                rm.switch_jumps[i][k] = parse_jump(
                    row.at(k), path + ".jumps[" + std::to_string(i) + "][" + std::to_string(k) + "]");
            }
        }
    }
    return rm;
}

} // namespace

ModelDocument parse_model_document(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw SchemaError("$", std::string("invalid JSON: ") + e.what());
    }
    // artifact echoes embed the original document under "config"
    if (j.is_object() && j.contains("config") && j.at("config").is_object() &&
        (j.at("config").contains("single") || j.at("config").contains("regime"))) {
        j = j.at("config");
    }
    ModelDocument doc;
    if (j.contains("single")) {
        doc.single = parse_single(j.at("single"), "single");
    } else if (j.contains("regime")) {
        doc.regime = parse_regime(j.at("regime"), "regime");
    } else {
        throw SchemaError("$", "document must contain a 'single' or 'regime' object");
    }
    return doc;
}

ModelDocument load_model_document(const std::string& file_path) {
    std::ifstream in(file_path);
    if (!in) throw SchemaError("$", "cannot open model file '" + file_path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model_document(buf.str());
}

std::string document_to_json(const ModelDocument& doc) {
    json j;
    if (doc.single) {
        json s;
        s["model"] = model_to_json(doc.single->model);
        s["delta"] = doc.single->delta;
        s["beta"] = doc.single->beta;
        s["q"] = doc.single->q;
        s["r"] = doc.single->r;
        s["payoff"] = payoff_to_json(doc.single->payoff);
        j["single"] = s;
    }
    if (doc.regime) {
        const RegimeModel& rm = *doc.regime;
        json r;
        r["beta"] = rm.beta;
        r["Q"] = rm.Q;
        json states = json::array();
        for (std::size_t i = 0; i < rm.n_states(); ++i) {
            json s;
            if (i < rm.names.size() && !rm.names[i].empty()) s["name"] = rm.names[i];
            s["model"] = model_to_json(rm.levy[i]);
            s["delta"] = rm.delta[i];
            s["r"] = rm.discount[i];
            states.push_back(s);
        }
        r["states"] = states;
        json jumps = json::array();
        for (const auto& row : rm.switch_jumps) {
            json jr = json::array();
            for (const auto& law : row) jr.push_back(jump_to_json(law));
            jumps.push_back(jr);
        }
        r["jumps"] = jumps;
        j["regime"] = r;
    }
    return j.dump(2);
}

void apply_override(ModelDocument& doc, const std::string& key, const std::string& value) {
    double v = 0.0;
    try {
        v = std::stod(value);
    } catch (...) {
        throw SchemaError("--set " + key, "value '" + value + "' is not a number");
    }
    if (doc.single) {
        AuxiliaryProblem& p = *doc.single;
        if (key == "q") p.q = v;
        else if (key == "r") p.r = v;
        else if (key == "delta") p.delta = v;
        else if (key == "beta") p.beta = v;
        else if (key == "gamma" || key == "c") p.model.gamma = v;
        else if (key == "sigma") p.model.sigma = v;
        else if (key == "lambda") p.model.jump_rate = v;
        else if (key == "mu") p.model.jump_mean_param = v;
        else throw SchemaError("--set " + key, "unknown override for a single-model document");
        return;
    }
    if (doc.regime) {
        if (key == "beta") {
            doc.regime->beta = v;
            return;
        }
        throw SchemaError("--set " + key, "unknown override for a regime document");
    }
    throw SchemaError("--set " + key, "no document loaded");
}

std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace refract
