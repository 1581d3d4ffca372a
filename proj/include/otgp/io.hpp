// File formats: per-sample dataset CSV, latent-truth CSV, flat key = value
// records (model summaries, certificates) and the benchmark results CSV.
// All floating-point output uses 17-significant-digit decimal rendering so
// files round-trip bit-exactly.
#pragma once

#include "otgp/bounds.hpp"
#include "otgp/scenarios.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace otgp {

inline std::string fmt_g17(double value)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ','))
        fields.push_back(field);
    if (!line.empty() && line.back() == ',')
        fields.emplace_back();
    return fields;
}

inline double parse_double(const std::string& s, std::size_t row, const char* what)
{
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size())
            throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("csv parse error at row " + std::to_string(row) + ": bad " +
                                 what + " value '" + s + "'");
    }
}

inline long parse_long(const std::string& s, std::size_t row, const char* what)
{
    long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw std::runtime_error("csv parse error at row " + std::to_string(row) + ": bad " +
                                 what + " value '" + s + "'");
    return v;
}

inline std::ofstream open_out(const std::filesystem::path& path)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    return out;
}

inline std::string trim(const std::string& s)
{
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos)
        return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

} // namespace detail

/// Writes one row per sample with header group_id,y,x1,...,xd; the response
/// is repeated on every row of its group.
inline void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds)
{
    std::ofstream out = detail::open_out(path);
    out << "group_id,y";
    for (int c = 1; c <= ds.dim; ++c)
        out << ",x" << c;
    out << "\n";
    for (const DatasetGroup& g : ds.groups) {
        for (Eigen::Index j = 0; j < g.cloud.size(); ++j) {
            out << g.group_id << ',' << fmt_g17(g.y);
            for (Eigen::Index c = 0; c < g.cloud.dim(); ++c)
                out << ',' << fmt_g17(g.cloud.points(j, c));
            out << "\n";
        }
    }
}

/// Reads a per-sample dataset CSV. The response must be identical across the
/// rows of a group; samples are sorted lexicographically within each group on
/// ingestion so downstream results do not depend on row order. Clouds get
/// uniform weights.
inline Dataset read_dataset_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open '" + path.string() + "' for reading");

    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("csv parse error at row 1: empty file");
    const auto header = detail::split_csv_line(detail::trim(line));
    if (header.size() < 3 || header[0] != "group_id" || header[1] != "y")
        throw std::runtime_error("csv parse error at row 1: expected header group_id,y,x1,...");
    const int dim = static_cast<int>(header.size()) - 2;

    struct Raw {
        double y = 0.0;
        std::vector<std::vector<double>> rows;
    };
    std::map<int, Raw> by_group;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        const std::string trimmed = detail::trim(line);
        if (trimmed.empty())
            continue;
        const auto fields = detail::split_csv_line(trimmed);
        if (fields.size() != header.size())
            throw std::runtime_error("csv parse error at row " + std::to_string(row) + ": expected " +
                                     std::to_string(header.size()) + " fields, got " +
                                     std::to_string(fields.size()));
        const int gid = static_cast<int>(detail::parse_long(fields[0], row, "group_id"));
        const double y = detail::parse_double(fields[1], row, "y");
        std::vector<double> coords(static_cast<std::size_t>(dim));
        for (int c = 0; c < dim; ++c)
            coords[static_cast<std::size_t>(c)] =
                detail::parse_double(fields[static_cast<std::size_t>(c) + 2], row, "coordinate");

        auto [it, inserted] = by_group.try_emplace(gid);
        if (inserted)
            it->second.y = y;
        else if (it->second.y != y)
            throw std::runtime_error("csv parse error at row " + std::to_string(row) +
                                     ": response differs within group " + std::to_string(gid));
        it->second.rows.push_back(std::move(coords));
    }
    if (by_group.empty())
        throw std::runtime_error("csv parse error: no data rows in '" + path.string() + "'");

    Dataset ds;
    ds.dim = dim;
    for (auto& [gid, raw] : by_group) {
        std::sort(raw.rows.begin(), raw.rows.end());
        Eigen::MatrixXd pts(static_cast<Eigen::Index>(raw.rows.size()), dim);
        for (std::size_t r = 0; r < raw.rows.size(); ++r)
            for (int c = 0; c < dim; ++c)
                pts(static_cast<Eigen::Index>(r), c) = raw.rows[r][static_cast<std::size_t>(c)];
        DatasetGroup g;
        g.group_id = gid;
        g.cloud = from_samples(pts);
        g.y = raw.y;
        ds.groups.push_back(std::move(g));
    }
    return ds;
}

/// Latent-truth side file for simulated data: group_id,split,y,f_true,eta,l1,...
inline void write_latents_csv(const std::filesystem::path& path, const Dataset& train,
                              const Dataset& test)
{
    const Eigen::Index n_latent =
        train.groups.empty() ? 0 : train.groups.front().latent.size();
    std::ofstream out = detail::open_out(path);
    out << "group_id,split,y,f_true,eta";
    for (Eigen::Index c = 1; c <= n_latent; ++c)
        out << ",l" << c;
    out << "\n";
    auto emit = [&](const Dataset& ds, const char* split) {
        for (const DatasetGroup& g : ds.groups) {
            out << g.group_id << ',' << split << ',' << fmt_g17(g.y) << ',' << fmt_g17(g.f_true)
                << ',' << fmt_g17(g.eta);
            for (Eigen::Index c = 0; c < g.latent.size(); ++c)
                out << ',' << fmt_g17(g.latent(c));
            out << "\n";
        }
    };
    emit(train, "train");
    emit(test, "test");
}

// Flat key = value records ------------------------------------------------

using KeyValueRecord = std::vector<std::pair<std::string, std::string>>;

inline void write_kv(const std::filesystem::path& path, const KeyValueRecord& record)
{
    std::ofstream out = detail::open_out(path);
    for (const auto& [key, value] : record)
        out << key << " = " << value << "\n";
}

inline KeyValueRecord read_kv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open '" + path.string() + "' for reading");
    KeyValueRecord record;
    std::string line;
    while (std::getline(in, line)) {
        const std::string trimmed = detail::trim(line);
        if (trimmed.empty() || trimmed.front() == '#')
            continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("key-value parse error in '" + path.string() + "': line '" +
                                     trimmed + "'");
        record.emplace_back(detail::trim(trimmed.substr(0, eq)),
                            detail::trim(trimmed.substr(eq + 1)));
    }
    return record;
}

inline const std::string* kv_find(const KeyValueRecord& record, const std::string& key)
{
    for (const auto& [k, v] : record)
        if (k == key)
            return &v;
    return nullptr;
}

inline double kv_double(const KeyValueRecord& record, const std::string& key)
{
    const std::string* v = kv_find(record, key);
    if (v == nullptr)
        throw std::runtime_error("key-value record is missing '" + key + "'");
    return std::stod(*v);
}

inline void write_certificate(const std::filesystem::path& path, const BandCertificate& cert)
{
    KeyValueRecord record;
    record.emplace_back("tau", fmt_g17(cert.tau));
    record.emplace_back("delta", fmt_g17(cert.delta));
    record.emplace_back("net_size", std::to_string(cert.net_size));
    record.emplace_back("beta", fmt_g17(cert.beta));
    record.emplace_back("gamma", fmt_g17(cert.gamma));
    record.emplace_back("L_f", fmt_g17(cert.l_f));
    record.emplace_back("L_k", fmt_g17(cert.l_k));
    record.emplace_back("L_nuN", fmt_g17(cert.l_nu));
    record.emplace_back("omega", fmt_g17(cert.omega));
    write_kv(path, record);
}

inline BandCertificate read_certificate(const std::filesystem::path& path)
{
    const KeyValueRecord record = read_kv(path);
    BandCertificate cert;
    cert.tau = kv_double(record, "tau");
    cert.delta = kv_double(record, "delta");
    cert.net_size = static_cast<std::uint64_t>(std::stoull(*kv_find(record, "net_size")));
    cert.beta = kv_double(record, "beta");
    cert.gamma = kv_double(record, "gamma");
    cert.l_f = kv_double(record, "L_f");
    cert.l_k = kv_double(record, "L_k");
    cert.l_nu = kv_double(record, "L_nuN");
    cert.omega = kv_double(record, "omega");
    return cert;
}

// Sectioned flat config files ----------------------------------------------

/// `key = value` lines, optionally under [section] headers; '#' starts a
/// comment. Section "" holds unsectioned or [global] keys.
struct ConfigFile {
    std::map<std::string, std::map<std::string, std::string>> sections;

    const std::string* find(const std::string& section, const std::string& key) const
    {
        if (const auto sit = sections.find(section); sit != sections.end())
            if (const auto kit = sit->second.find(key); kit != sit->second.end())
                return &kit->second;
        return nullptr;
    }

    /// Method-section value with fallback to the global section.
    const std::string* lookup(const std::string& section, const std::string& key) const
    {
        if (const std::string* v = find(section, key))
            return v;
        return find("", key);
    }
};

inline ConfigFile read_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open config '" + path.string() + "'");
    ConfigFile cfg;
    std::string section;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        std::string trimmed = detail::trim(line);
        if (const auto hash = trimmed.find('#'); hash != std::string::npos)
            trimmed = detail::trim(trimmed.substr(0, hash));
        if (trimmed.empty())
            continue;
        if (trimmed.front() == '[' && trimmed.back() == ']') {
            section = detail::trim(trimmed.substr(1, trimmed.size() - 2));
            if (section == "global")
                section.clear();
            continue;
        }
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config parse error at line " + std::to_string(row) +
                                     ": expected key = value");
        cfg.sections[section][detail::trim(trimmed.substr(0, eq))] =
            detail::trim(trimmed.substr(eq + 1));
    }
    return cfg;
}

} // namespace otgp
