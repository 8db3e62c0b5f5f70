#include "duomic/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "duomic/rng.hpp"

namespace duomic {

namespace {

constexpr const char* kManifestHeader = "sample_id,patient_id,af_path,shg_path,label";

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path,
                              const std::vector<std::string>& label_space, bool check_paths) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty manifest");
    if (strip_cr(line) != kManifestHeader)
        throw DataError(path.string() + ": bad header, expected '" + kManifestHeader + "'");

    std::unordered_map<std::string, int> label_index;
    for (std::size_t i = 0; i < label_space.size(); ++i)
        label_index[label_space[i]] = static_cast<int>(i);

    DatasetManifest manifest;
    manifest.labels = label_space;
    std::unordered_set<std::string> seen;
    std::vector<std::string> missing;
    const std::filesystem::path base = path.parent_path();

    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        line = strip_cr(line);
        if (line.empty()) continue;
        auto fields = split_csv_row(line);
        if (fields.size() != 5)
            throw DataError(path.string() + " row " + std::to_string(row) + ": expected 5 fields, got " +
                            std::to_string(fields.size()));
        SampleRecord rec;
        rec.sample_id = fields[0];
        rec.patient_id = fields[1];
        rec.af_path = fields[2];
        rec.shg_path = fields[3];
        if (rec.sample_id.empty())
            throw DataError(path.string() + " row " + std::to_string(row) + ": empty sample_id");
        if (!seen.insert(rec.sample_id).second)
            throw DataError(path.string() + " row " + std::to_string(row) + ": duplicate sample_id '" +
                            rec.sample_id + "'");
        auto it = label_index.find(fields[4]);
        if (it == label_index.end())
            throw DataError(path.string() + " row " + std::to_string(row) + ": unknown label '" +
                            fields[4] + "'");
        rec.label = it->second;
        if (rec.af_path.is_relative()) rec.af_path = base / rec.af_path;
        if (rec.shg_path.is_relative()) rec.shg_path = base / rec.shg_path;
        if (check_paths) {
            if (!std::filesystem::exists(rec.af_path)) missing.push_back(rec.af_path.string());
            if (!std::filesystem::exists(rec.shg_path)) missing.push_back(rec.shg_path.string());
        }
        manifest.records.push_back(std::move(rec));
    }
    if (!missing.empty()) {
        std::string msg = path.string() + ": missing image files:";
        for (const auto& m : missing) msg += "\n  " + m;
        throw DataError(msg);
    }
    return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest " + path.string());
    out << kManifestHeader << "\n";
    for (const auto& r : manifest.records)
        out << r.sample_id << ',' << r.patient_id << ',' << r.af_path.string() << ','
            << r.shg_path.string() << ',' << manifest.label_name(r.label) << "\n";
}

std::vector<double> compute_class_weights(const std::vector<std::size_t>& counts) {
    if (counts.empty()) throw ValueError("compute_class_weights: no classes");
    std::size_t n_max = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] == 0)
            throw ValueError("compute_class_weights: class " + std::to_string(i) + " has zero count");
        n_max = std::max(n_max, counts[i]);
    }
    std::vector<double> weights(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        weights[i] = static_cast<double>(n_max) / static_cast<double>(counts[i]);
    return weights;
}

FoldPlan stratified_kfold(const DatasetManifest& manifest, int k, std::uint64_t seed,
                          bool group_by_patient) {
    if (k < 2) throw ValueError("stratified_kfold: k must be >= 2");
    FoldPlan plan;
    plan.seed = seed;
    plan.k = k;
    plan.group_by_patient = group_by_patient;

    if (!group_by_patient) {
        const auto counts = manifest.counts();
        for (std::size_t c = 0; c < counts.size(); ++c)
            if (counts[c] > 0 && counts[c] < static_cast<std::size_t>(k))
                throw ValueError("stratified_kfold: class '" + manifest.labels[c] + "' has only " +
                                 std::to_string(counts[c]) + " samples for k=" + std::to_string(k));
        for (std::size_t c = 0; c < manifest.labels.size(); ++c) {
            std::vector<const SampleRecord*> members;
            for (const auto& r : manifest.records)
                if (r.label == static_cast<int>(c)) members.push_back(&r);
            Rng rng(mix_seed(seed, {0x5f01d, c}));
            rng.shuffle(members);
            for (std::size_t i = 0; i < members.size(); ++i)
                plan.assignments[members[i]->sample_id] = static_cast<int>(i % k);
        }
        return plan;
    }

    // group mode: keep each patient's samples in one fold; greedy size balance
    std::map<std::string, std::vector<const SampleRecord*>> patients;
    for (const auto& r : manifest.records) {
        if (r.patient_id.empty())
            throw DataError("stratified_kfold: group mode needs patient_id for sample '" +
                            r.sample_id + "'");
        patients[r.patient_id].push_back(&r);
    }
    if (patients.size() < static_cast<std::size_t>(k))
        throw ValueError("stratified_kfold: only " + std::to_string(patients.size()) +
                         " patients for k=" + std::to_string(k));
    std::vector<std::string> ids;
    for (const auto& [pid, _] : patients) ids.push_back(pid);
    Rng rng(mix_seed(seed, {0x9a0467}));
    rng.shuffle(ids);
    std::stable_sort(ids.begin(), ids.end(), [&](const std::string& a, const std::string& b) {
        return patients[a].size() > patients[b].size();
    });
    std::vector<std::size_t> load(static_cast<std::size_t>(k), 0);
    for (const auto& pid : ids) {
        const std::size_t fold =
            std::min_element(load.begin(), load.end()) - load.begin();
        for (const auto* r : patients[pid]) plan.assignments[r->sample_id] = static_cast<int>(fold);
        load[fold] += patients[pid].size();
    }
    return plan;
}

DatasetManifest to_binary_view(const DatasetManifest& manifest) {
    if (manifest.labels != tissue_labels())
        throw ValueError("to_binary_view: expects the 3-class tissue manifest");
    DatasetManifest out;
    out.labels = binary_labels();
    out.records = manifest.records;
    for (auto& r : out.records) {
        const std::string& name = manifest.label_name(r.label);
        r.label = name == "cancer" ? 0 : 1;
    }
    return out;
}

std::string FoldPlan::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["k"] = k;
    j["group_by_patient"] = group_by_patient;
    j["assignments"] = assignments;
    return j.dump(2);
}

FoldPlan FoldPlan::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    FoldPlan plan;
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.k = j.at("k").get<int>();
    plan.group_by_patient = j.value("group_by_patient", false);
    plan.assignments = j.at("assignments").get<std::map<std::string, int>>();
    return plan;
}

void FoldPlan::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write fold plan " + path.string());
    out << to_json() << "\n";
}

FoldPlan FoldPlan::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open fold plan " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return from_json(ss.str());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace duomic
