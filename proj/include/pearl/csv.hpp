#ifndef PEARL_CSV_HPP
#define PEARL_CSV_HPP

#include "pearl/core.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace pearl {

namespace csv {

inline std::vector<std::string> split_line(std::string_view line)
{
    std::vector<std::string> cells;
    std::string cell;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (ch != '\r') {
            cell.push_back(ch);
        }
    }
    cells.push_back(cell);
    return cells;
}

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t'))
        s.remove_suffix(1);
    return s;
}

/// Locale-independent parse of a full cell; '.' is the only decimal separator.
inline std::optional<double> parse_double(std::string_view s)
{
    s = trim(s);
    if (!s.empty() && s.front() == '+')
        s.remove_prefix(1);
    if (s.empty())
        return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        return std::nullopt;
    return v;
}

/// Shortest round-trip decimal representation.
inline std::string format_double(double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc())
        throw Error("cannot format number");
    return std::string(buf, ptr);
}

} // namespace csv

/// Reads a header-first CSV: the named label column becomes the target and
/// every other column is a numeric feature. Class labels must be integers in
/// 0..C-1 with C inferred as max label + 1 (at least 2).
inline LabeledDataset read_labeled_csv(std::istream& in, const std::string& label_column, TaskKind task)
{
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "CSV is empty");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
        line.erase(0, 3);
    const auto header = csv::split_line(line);
    int label_idx = -1;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (csv::trim(header[c]) == label_column)
            label_idx = static_cast<int>(c);
    require(label_idx >= 0, "label column '" + label_column + "' not found in CSV header");
    require(header.size() >= 2, "CSV needs at least one feature column besides the label");

    std::vector<std::vector<double>> rows;
    std::vector<double> labels;
    std::size_t row_number = 1;
    while (std::getline(in, line)) {
        ++row_number;
        if (csv::trim(line).empty() || line == "\r")
            continue;
        const auto cells = csv::split_line(line);
        require(cells.size() == header.size(), "CSV row " + std::to_string(row_number) + " has " +
                                                   std::to_string(cells.size()) + " cells, expected " +
                                                   std::to_string(header.size()));
        std::vector<double> feats;
        feats.reserve(header.size() - 1);
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto v = csv::parse_double(cells[c]);
            require(v.has_value(), "CSV row " + std::to_string(row_number) + ": cannot parse cell '" + cells[c] +
                                       "' in column '" + header[c] + "'");
            if (static_cast<int>(c) == label_idx)
                labels.push_back(*v);
            else
                feats.push_back(*v);
        }
        rows.push_back(std::move(feats));
    }
    require(!rows.empty(), "CSV has no data rows");

    Matrix x(static_cast<Index>(rows.size()), static_cast<Index>(header.size() - 1));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            x(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];

    if (task == TaskKind::Regression) {
        Vector y = Eigen::Map<const Vector>(labels.data(), static_cast<Index>(labels.size()));
        return LabeledDataset(std::move(x), RealTargets{std::move(y)});
    }
    ClassTargets ct;
    int max_label = 1;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double v = labels[i];
        require(v >= 0.0 && v == std::floor(v) && v < 1e6,
                "CSV row " + std::to_string(i + 2) + ": class label must be a nonnegative integer");
        ct.labels.push_back(static_cast<int>(v));
        max_label = std::max(max_label, static_cast<int>(v));
    }
    ct.num_classes = max_label + 1;
    return LabeledDataset(std::move(x), std::move(ct));
}

inline LabeledDataset read_labeled_csv(const std::string& path, const std::string& label_column, TaskKind task)
{
    std::ifstream in(path);
    require(in.good(), "cannot open CSV file '" + path + "'");
    return read_labeled_csv(in, label_column, task);
}

/// Reads a header-first, all-numeric CSV, optionally dropping one named column.
inline Matrix read_feature_csv(std::istream& in, const std::string& drop_column = {})
{
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "CSV is empty");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
        line.erase(0, 3);
    const auto header = csv::split_line(line);
    int drop_idx = -1;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (!drop_column.empty() && csv::trim(header[c]) == drop_column)
            drop_idx = static_cast<int>(c);
    const std::size_t width = header.size() - (drop_idx >= 0 ? 1 : 0);
    require(width >= 1, "CSV has no feature columns");

    std::vector<double> flat;
    std::size_t nrows = 0;
    std::size_t row_number = 1;
    while (std::getline(in, line)) {
        ++row_number;
        if (csv::trim(line).empty() || line == "\r")
            continue;
        const auto cells = csv::split_line(line);
        require(cells.size() == header.size(), "CSV row " + std::to_string(row_number) + " has the wrong cell count");
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (static_cast<int>(c) == drop_idx)
                continue;
            const auto v = csv::parse_double(cells[c]);
            require(v.has_value(), "CSV row " + std::to_string(row_number) + ": cannot parse cell '" + cells[c] + "'");
            flat.push_back(*v);
        }
        ++nrows;
    }
    require(nrows > 0, "CSV has no data rows");
    Matrix x(static_cast<Index>(nrows), static_cast<Index>(width));
    for (std::size_t i = 0; i < nrows; ++i)
        for (std::size_t j = 0; j < width; ++j)
            x(static_cast<Index>(i), static_cast<Index>(j)) = flat[i * width + j];
    return x;
}

} // namespace pearl

#endif // PEARL_CSV_HPP
