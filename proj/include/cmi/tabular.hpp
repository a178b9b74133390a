#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmi/conditioning.hpp"
#include "cmi/matrix.hpp"

namespace cmi {

class IngestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ColumnKind { numeric, categorical };

struct ColumnSchema {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
};

/// Encoded tabular data. Rows [0, train_rows) are the training split.
/// Categorical columns are one-hot expanded (categories fixed on the training
/// split, unseen test values go to an "other" column); numeric columns are
/// standardised with training-split mean and standard deviation.
struct TabularDataset {
    Matrix features;
    std::vector<OutcomeKey> sensitive;
    std::vector<int> labels;  // 0 / 1
    std::vector<ColumnSchema> schema;         // raw input columns
    std::vector<std::string> feature_names;   // encoded columns
    std::size_t train_rows = 0;

    std::size_t size() const { return features.rows(); }
    std::size_t sensitive_groups() const;
    TabularDataset slice(std::size_t begin, std::size_t end) const;
    TabularDataset train() const { return slice(0, train_rows); }
    TabularDataset test() const { return slice(train_rows, size()); }
};

/// One raw record: cell strings for the schema columns, plus its label and group.
struct RawRecord {
    std::vector<std::string> cells;
    int label = 0;
    OutcomeKey sensitive = 0;
};

/// Encodes raw records; the first `train_rows` define categories and scaling.
TabularDataset encode_records(const std::vector<RawRecord>& records, const std::vector<ColumnSchema>& schema,
                              std::size_t train_rows);

/// UCI Statlog German credit (german.data, space separated, 20 attributes plus
/// a 1/2 class). Sensitive attribute: age > 25. Label: good credit. The first
/// 900 rows train, the last 100 test. Age is not an encoder input.
TabularDataset load_german(const std::filesystem::path& file);

/// UCI Adult (adult.data + adult.test, comma separated). Sensitive attribute:
/// sex (Male = 1). Label: income >50K. The predefined split is kept.
TabularDataset load_adult(const std::filesystem::path& train_file, const std::filesystem::path& test_file);

/// Looks for german.data or adult.data/adult.test under `dir`.
TabularDataset load_uci(const std::string& name, const std::filesystem::path& dir);

struct BiasedTabularSpec {
    std::size_t n = 4000;
    std::size_t signal_columns = 6;  // independent of z, drive the label
    std::size_t proxy_columns = 4;   // shifted by +-proxy_shift/2 with z
    double proxy_shift = 2.0;
    double label_signal = 1.5;       // norm of the label weight on signal columns
    double label_z_effect = 0.6;     // logit shift between groups
    double train_fraction = 0.75;
    std::uint64_t seed = 0;
};

/// Binary z; proxy features correlated with z; label mostly from the signal
/// features plus a modest direct z effect.
TabularDataset make_biased_tabular(const BiasedTabularSpec& spec);

}  // namespace cmi
