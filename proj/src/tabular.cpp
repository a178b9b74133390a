#include "cmi/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cmi/rng.hpp"

namespace cmi {

std::size_t TabularDataset::sensitive_groups() const {
    return std::set<OutcomeKey>(sensitive.begin(), sensitive.end()).size();
}

TabularDataset TabularDataset::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > size()) throw std::out_of_range("TabularDataset::slice: bad range");
    TabularDataset out;
    out.features = Matrix(end - begin, features.cols());
    std::copy(features.data().begin() + static_cast<std::ptrdiff_t>(begin * features.cols()),
              features.data().begin() + static_cast<std::ptrdiff_t>(end * features.cols()),
              out.features.data().begin());
    out.sensitive.assign(sensitive.begin() + static_cast<std::ptrdiff_t>(begin),
                         sensitive.begin() + static_cast<std::ptrdiff_t>(end));
    out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                      labels.begin() + static_cast<std::ptrdiff_t>(end));
    out.schema = schema;
    out.feature_names = feature_names;
    out.train_rows = begin < train_rows ? std::min(train_rows, end) - begin : 0;
    return out;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v))
        throw IngestError("row " + std::to_string(row + 1) + ", column " + column + ": cannot parse '" + cell +
                          "' as a number");
    return v;
}

// Standardises every column with statistics of the first `train_rows` rows.
void standardize(Matrix& m, std::size_t train_rows) {
    if (train_rows == 0) return;
    for (std::size_t c = 0; c < m.cols(); ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < train_rows; ++r) mean += m(r, c);
        mean /= static_cast<double>(train_rows);
        double var = 0.0;
        for (std::size_t r = 0; r < train_rows; ++r) var += (m(r, c) - mean) * (m(r, c) - mean);
        double sd = std::sqrt(var / static_cast<double>(train_rows));
        if (!(sd > 1e-12)) sd = 1.0;
        for (std::size_t r = 0; r < m.rows(); ++r) m(r, c) = (m(r, c) - mean) / sd;
    }
}

std::vector<std::string> read_lines(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IngestError("cannot open " + file.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

}  // namespace

TabularDataset encode_records(const std::vector<RawRecord>& records, const std::vector<ColumnSchema>& schema,
                              std::size_t train_rows) {
    if (records.empty()) throw IngestError("no records");
    if (train_rows == 0 || train_rows > records.size()) throw IngestError("train split must be non-empty");
    for (std::size_t r = 0; r < records.size(); ++r)
        if (records[r].cells.size() != schema.size())
            throw IngestError("row " + std::to_string(r + 1) + ": expected " + std::to_string(schema.size()) +
                              " cells, got " + std::to_string(records[r].cells.size()));

    // Output layout: one column per numeric input, one per training category plus "other".
    std::vector<std::map<std::string, std::size_t>> categories(schema.size());
    std::vector<std::size_t> offset(schema.size());
    std::vector<std::string> names;
    for (std::size_t c = 0; c < schema.size(); ++c) {
        offset[c] = names.size();
        if (schema[c].kind == ColumnKind::numeric) {
            names.push_back(schema[c].name);
            continue;
        }
        std::set<std::string> seen;
        for (std::size_t r = 0; r < train_rows; ++r) seen.insert(records[r].cells[c]);
        for (const auto& v : seen) {
            categories[c][v] = names.size() - offset[c];
            names.push_back(schema[c].name + "=" + v);
        }
        names.push_back(schema[c].name + "=other");
    }

    TabularDataset out;
    out.features = Matrix(records.size(), names.size());
    out.schema = schema;
    out.feature_names = names;
    out.train_rows = train_rows;
    for (std::size_t r = 0; r < records.size(); ++r) {
        const RawRecord& rec = records[r];
        for (std::size_t c = 0; c < schema.size(); ++c) {
            if (schema[c].kind == ColumnKind::numeric) {
                out.features(r, offset[c]) = parse_number(rec.cells[c], r, schema[c].name);
            } else {
                auto it = categories[c].find(rec.cells[c]);
                const std::size_t k = it == categories[c].end() ? categories[c].size() : it->second;
                out.features(r, offset[c] + k) = 1.0;
            }
        }
        if (rec.label != 0 && rec.label != 1) throw IngestError("row " + std::to_string(r + 1) + ": label must be 0/1");
        out.labels.push_back(rec.label);
        out.sensitive.push_back(rec.sensitive);
    }
    // One-hot columns are standardised too so every encoder input has unit scale.
    standardize(out.features, train_rows);
    return out;
}

TabularDataset load_german(const std::filesystem::path& file) {
    static const char* names[20] = {"checking",  "duration",    "history",     "purpose",   "amount",
                                    "savings",   "employment",  "installment", "personal",  "debtors",
                                    "residence", "property",    "age",         "plans",     "housing",
                                    "credits",   "job",         "dependents",  "telephone", "foreign"};
    static const bool numeric[20] = {false, true,  false, false, true,  false, false, true,  false, false,
                                     true,  false, true,  false, false, true,  false, true,  false, false};
    constexpr std::size_t kAge = 12;
    std::vector<ColumnSchema> schema;
    for (std::size_t c = 0; c < 20; ++c)
        if (c != kAge) schema.push_back({names[c], numeric[c] ? ColumnKind::numeric : ColumnKind::categorical});

    std::vector<RawRecord> records;
    const auto lines = read_lines(file);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::istringstream ss(lines[i]);
        std::vector<std::string> tok;
        for (std::string t; ss >> t;) tok.push_back(t);
        if (tok.empty()) continue;
        if (tok.size() != 21)
            throw IngestError(file.string() + ":" + std::to_string(i + 1) + ": expected 21 fields, got " +
                              std::to_string(tok.size()));
        RawRecord rec;
        for (std::size_t c = 0; c < 20; ++c)
            if (c != kAge) rec.cells.push_back(tok[c]);
        rec.sensitive = parse_number(tok[kAge], i, "age") > 25.0 ? 1 : 0;
        if (tok[20] != "1" && tok[20] != "2")
            throw IngestError(file.string() + ":" + std::to_string(i + 1) + ": class must be 1 or 2");
        rec.label = tok[20] == "1" ? 1 : 0;
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw IngestError(file.string() + ": no records");
    const std::size_t train = records.size() == 1000 ? 900 : (records.size() * 9) / 10;
    return encode_records(records, schema, std::max<std::size_t>(train, 1));
}

namespace {

const std::vector<ColumnSchema>& adult_schema() {
    static const std::vector<ColumnSchema> s = {
        {"age", ColumnKind::numeric},           {"workclass", ColumnKind::categorical},
        {"fnlwgt", ColumnKind::numeric},        {"education", ColumnKind::categorical},
        {"education_num", ColumnKind::numeric}, {"marital_status", ColumnKind::categorical},
        {"occupation", ColumnKind::categorical}, {"relationship", ColumnKind::categorical},
        {"race", ColumnKind::categorical},      {"capital_gain", ColumnKind::numeric},
        {"capital_loss", ColumnKind::numeric},  {"hours_per_week", ColumnKind::numeric},
        {"native_country", ColumnKind::categorical}};
    return s;
}

void read_adult(const std::filesystem::path& file, std::vector<RawRecord>& out) {
    constexpr std::size_t kSex = 9;
    const auto lines = read_lines(file);
    std::size_t added = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string line = trim(lines[i]);
        if (line.empty() || line.front() == '|') continue;
        std::vector<std::string> tok;
        std::stringstream ss(line);
        for (std::string t; std::getline(ss, t, ',');) tok.push_back(trim(t));
        if (tok.size() != 15)
            throw IngestError(file.string() + ":" + std::to_string(i + 1) + ": expected 15 fields, got " +
                              std::to_string(tok.size()));
        RawRecord rec;
        for (std::size_t c = 0; c < 14; ++c)
            if (c != kSex) rec.cells.push_back(tok[c]);
        if (tok[kSex] != "Male" && tok[kSex] != "Female")
            throw IngestError(file.string() + ":" + std::to_string(i + 1) + ": unknown sex '" + tok[kSex] + "'");
        rec.sensitive = tok[kSex] == "Male" ? 1 : 0;
        std::string label = tok[14];
        if (!label.empty() && label.back() == '.') label.pop_back();
        if (label != ">50K" && label != "<=50K")
            throw IngestError(file.string() + ":" + std::to_string(i + 1) + ": unknown income label '" + tok[14] + "'");
        rec.label = label == ">50K" ? 1 : 0;
        out.push_back(std::move(rec));
        ++added;
    }
    if (added == 0) throw IngestError(file.string() + ": no records");
}

}  // namespace

TabularDataset load_adult(const std::filesystem::path& train_file, const std::filesystem::path& test_file) {
    std::vector<RawRecord> records;
    read_adult(train_file, records);
    const std::size_t train = records.size();
    read_adult(test_file, records);
    return encode_records(records, adult_schema(), train);
}

TabularDataset load_uci(const std::string& name, const std::filesystem::path& dir) {
    if (name == "german") return load_german(dir / "german.data");
    if (name == "adult") return load_adult(dir / "adult.data", dir / "adult.test");
    throw std::invalid_argument("unknown UCI dataset '" + name + "' (expected german or adult)");
}

TabularDataset make_biased_tabular(const BiasedTabularSpec& spec) {
    if (spec.n < 4) throw std::invalid_argument("make_biased_tabular: n too small");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw std::invalid_argument("make_biased_tabular: train_fraction must be in (0, 1)");
    Rng rng = Rng::stream(spec.seed, "tabular");
    const std::size_t d = spec.signal_columns + spec.proxy_columns;
    TabularDataset out;
    out.features = Matrix(spec.n, d);
    const double w = spec.signal_columns ? spec.label_signal / std::sqrt(static_cast<double>(spec.signal_columns)) : 0.0;
    for (std::size_t r = 0; r < spec.n; ++r) {
        const OutcomeKey z = rng.uniform() < 0.5 ? 1 : 0;
        const double s = z ? 1.0 : -1.0;
        double logit = 0.5 * spec.label_z_effect * s;
        for (std::size_t c = 0; c < spec.signal_columns; ++c) {
            out.features(r, c) = rng.normal();
            logit += w * out.features(r, c);
        }
        for (std::size_t c = 0; c < spec.proxy_columns; ++c)
            out.features(r, spec.signal_columns + c) = 0.5 * spec.proxy_shift * s + rng.normal();
        const double u = rng.uniform(1e-12, 1.0 - 1e-12);
        out.labels.push_back(logit + std::log(u / (1.0 - u)) > 0.0 ? 1 : 0);
        out.sensitive.push_back(z);
    }
    for (std::size_t c = 0; c < spec.signal_columns; ++c) {
        out.schema.push_back({"signal_" + std::to_string(c + 1), ColumnKind::numeric});
        out.feature_names.push_back(out.schema.back().name);
    }
    for (std::size_t c = 0; c < spec.proxy_columns; ++c) {
        out.schema.push_back({"proxy_" + std::to_string(c + 1), ColumnKind::numeric});
        out.feature_names.push_back(out.schema.back().name);
    }
    out.train_rows = static_cast<std::size_t>(spec.train_fraction * static_cast<double>(spec.n));
    standardize(out.features, out.train_rows);
    return out;
}

}  // namespace cmi
