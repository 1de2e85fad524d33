#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "camlab/encoder.hpp"
#include "camlab/milp.hpp"

namespace camlab {

/// One expert state-action pair. The node-local instance travels with the
/// sample so augmentation and label spot-checks need no external lookup.
struct ExpertSample {
    BipartiteState state;
    int action = 0;               // index into candidates
    std::vector<int> candidates;  // variable indices
    MilpInstance instance;        // root instance plus node bound tightenings
    std::string instance_ref;
    int depth = 0;
    long pair_id = -1;            // links an augmented sample to its original
    std::optional<ShiftVector> shift;  // absent for originals
};

inline nlohmann::json state_to_json(const BipartiteState& st) {
    nlohmann::json j;
    nlohmann::json cf = nlohmann::json::array();
    for (const auto& row : st.cons_feats) cf.push_back(std::vector<double>(row.begin(), row.end()));
    nlohmann::json vf = nlohmann::json::array();
    for (const auto& row : st.var_feats) vf.push_back(std::vector<double>(row.begin(), row.end()));
    nlohmann::json ed = nlohmann::json::array();
    for (const auto& e : st.edges) ed.push_back({e.cons, e.var, e.coef});
    j["cons_feats"] = cf;
    j["var_feats"] = vf;
    j["edges"] = ed;
    j["candidates"] = st.candidates;
    j["has_incumbent"] = st.has_incumbent;
    return j;
}

inline BipartiteState state_from_json(const nlohmann::json& j) {
    BipartiteState st;
    for (const auto& row : j.at("cons_feats")) {
        std::array<double, kNumConsFeats> a{};
        for (int k = 0; k < kNumConsFeats; ++k) a[k] = row.at(k).get<double>();
        st.cons_feats.push_back(a);
    }
    for (const auto& row : j.at("var_feats")) {
        std::array<double, kNumVarFeats> a{};
        for (int k = 0; k < kNumVarFeats; ++k) a[k] = row.at(k).get<double>();
        st.var_feats.push_back(a);
    }
    for (const auto& e : j.at("edges"))
        st.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>()});
    st.candidates = j.at("candidates").get<std::vector<int>>();
    st.has_incumbent = j.at("has_incumbent").get<bool>();
    return st;
}

inline nlohmann::json sample_to_json(const ExpertSample& s) {
    nlohmann::json j;
    j["schema"] = kStateSchema;
    j["state"] = state_to_json(s.state);
    j["action"] = s.action;
    j["candidates"] = s.candidates;
    j["instance"] = instance_to_json(s.instance);
    j["instance_ref"] = s.instance_ref;
    j["depth"] = s.depth;
    j["pair_id"] = s.pair_id;
    if (s.shift) j["shift"] = s.shift->s;
    return j;
}

inline ExpertSample sample_from_json(const nlohmann::json& j) {
    if (j.at("schema").get<std::string>() != kStateSchema)
        throw std::runtime_error("unsupported sample schema: " +
                                 j.at("schema").get<std::string>());
    ExpertSample s;
    s.state = state_from_json(j.at("state"));
    s.action = j.at("action").get<int>();
    s.candidates = j.at("candidates").get<std::vector<int>>();
    s.instance = instance_from_json(j.at("instance"));
    s.instance_ref = j.at("instance_ref").get<std::string>();
    s.depth = j.at("depth").get<int>();
    s.pair_id = j.value("pair_id", -1L);
    if (j.contains("shift")) s.shift = ShiftVector{j.at("shift").get<std::vector<double>>()};
    return s;
}

inline void save_samples(const std::vector<ExpertSample>& samples, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    for (const auto& s : samples) f << sample_to_json(s).dump() << '\n';
}

inline std::vector<ExpertSample> load_samples(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::vector<ExpertSample> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        out.push_back(sample_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

}  // namespace camlab
