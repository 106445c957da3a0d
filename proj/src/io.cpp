#include "ncad/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace ncad {

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw NumericError("format_double: value does not format");
    return std::string(buf, ptr);
}

double parse_double(std::string_view text, const std::string& context) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) {
        throw DataError(context + ": '" + std::string(text) + "' is not a real number");
    }
    return v;
}

namespace {

std::int64_t parse_int(std::string_view text, const std::string& context) {
    std::int64_t v = 0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) {
        throw DataError(context + ": '" + std::string(text) + "' is not an integer");
    }
    return v;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    // A UTF-8 byte-order mark would corrupt the first header field.
    if (!lines.empty() && lines.front().rfind("\xEF\xBB\xBF", 0) == 0) {
        lines.front().erase(0, 3);
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) throw DataError("'" + path.string() + "' is empty");
    return lines;
}

// Comma splitter honoring double-quoted fields ("" escapes a quote).
std::vector<std::string> split_csv(const std::string& line, const std::string& context) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    if (quoted) throw DataError(context + ": unterminated quote");
    fields.push_back(std::move(field));
    return fields;
}

void require_columns(const std::vector<std::string>& header,
                     const std::vector<std::string>& expected, const std::string& context) {
    for (const auto& name : header) {
        if (std::find(expected.begin(), expected.end(), name) == expected.end()) {
            throw DataError(context + ": unknown column '" + name + "'");
        }
    }
    if (header != expected) {
        std::string want;
        for (const auto& name : expected) {
            if (!want.empty()) want.push_back(',');
            want += name;
        }
        throw DataError(context + ": expected header '" + want + "'");
    }
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    return out;
}

void finish_out(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw DataError("write to '" + path.string() + "' failed");
}

std::string row_context(const std::filesystem::path& path, std::size_t line_no) {
    return path.string() + ":" + std::to_string(line_no + 1);
}

}  // namespace

void write_series_csv(const std::filesystem::path& path, const TimeSeries& series) {
    series.validate();
    auto out = open_out(path);
    out << "timestamp";
    for (std::int64_t d = 0; d < series.channels; ++d) out << ",ch_" << d;
    out << ",label\n";
    for (std::int64_t t = 0; t < series.length; ++t) {
        out << format_double(series.timestamps[static_cast<std::size_t>(t)]);
        for (std::int64_t d = 0; d < series.channels; ++d) {
            out << ',' << format_double(series.at(t, d));
        }
        out << ',' << label_to_int(series.labels[static_cast<std::size_t>(t)]) << '\n';
    }
    finish_out(out, path);
}

TimeSeries read_series_csv(const std::filesystem::path& path, const std::string& id) {
    const auto lines = read_lines(path);
    const auto header = split_csv(lines[0], row_context(path, 0));
    if (header.size() < 3 || header.front() != "timestamp" || header.back() != "label") {
        throw DataError(path.string() + ": expected header 'timestamp,ch_0,...,label'");
    }
    const auto channels = static_cast<std::int64_t>(header.size()) - 2;
    for (std::int64_t d = 0; d < channels; ++d) {
        const auto& name = header[static_cast<std::size_t>(d + 1)];
        if (name != "ch_" + std::to_string(d)) {
            throw DataError(path.string() + ": unknown column '" + name + "'");
        }
    }

    TimeSeries series;
    series.id = id;
    series.channels = channels;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto ctx = row_context(path, i);
        const auto fields = split_csv(lines[i], ctx);
        if (fields.size() != header.size()) {
            throw DataError(ctx + ": expected " + std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        }
        series.timestamps.push_back(parse_double(fields[0], ctx + " timestamp"));
        for (std::int64_t d = 0; d < channels; ++d) {
            series.values.push_back(parse_double(fields[static_cast<std::size_t>(d + 1)],
                                                 ctx + " ch_" + std::to_string(d)));
        }
        const auto raw = parse_int(fields.back(), ctx + " label");
        if (raw < -1 || raw > 1) {
            throw DataError(ctx + ": label must be -1, 0, or 1, got " + std::to_string(raw));
        }
        series.labels.push_back(label_from_int(static_cast<int>(raw)));
    }
    series.length = static_cast<std::int64_t>(series.labels.size());
    series.validate();
    return series;
}

namespace {

// Portable file stem for a series id; anything else would not survive a
// round trip through the manifest.
void require_portable_id(const std::string& id) {
    if (id.empty()) throw DataError("series id is empty");
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
        if (!ok) {
            throw DataError("series id '" + id + "' contains '" + std::string(1, c) +
                            "'; ids must be portable file names");
        }
    }
    if (id.front() == '.') throw DataError("series id '" + id + "' may not start with '.'");
}

}  // namespace

void save_dataset(const std::filesystem::path& dir, std::span<const Dataset> splits,
                  const std::string& manifest_name) {
    nlohmann::json rows = nlohmann::json::array();
    std::filesystem::create_directories(dir);
    for (const auto& dataset : splits) {
        if (dataset.split.empty()) throw DataError("dataset has no split tag");
        dataset.validate();
        for (const auto& series : dataset.series) {
            require_portable_id(series.id);
            const auto rel = dataset.split + "/" + series.id + ".csv";
            write_series_csv(dir / rel, series);
            rows.push_back({{"file", rel}, {"split", dataset.split}});
        }
    }
    nlohmann::json manifest{{"version", kManifestVersion}, {"series", rows}};
    auto out = open_out(dir / manifest_name);
    out << manifest.dump(2) << '\n';
    finish_out(out, dir / manifest_name);
}

std::vector<Dataset> load_datasets(const std::filesystem::path& manifest_path) {
    const auto manifest = read_json_file(manifest_path);
    if (!manifest.contains("version") || manifest.at("version") != kManifestVersion) {
        throw DataError(manifest_path.string() + ": unsupported manifest version");
    }
    if (!manifest.contains("series") || !manifest.at("series").is_array()) {
        throw DataError(manifest_path.string() + ": manifest lacks a series list");
    }
    const auto base = manifest_path.parent_path();

    std::vector<Dataset> out;
    std::map<std::string, std::size_t> split_index;
    for (const auto& row : manifest.at("series")) {
        if (!row.contains("file") || !row.contains("split")) {
            throw DataError(manifest_path.string() + ": series rows need 'file' and 'split'");
        }
        const auto file = row.at("file").get<std::string>();
        const auto split = row.at("split").get<std::string>();
        auto [it, fresh] = split_index.emplace(split, out.size());
        if (fresh) {
            out.emplace_back();
            out.back().split = split;
        }
        const std::filesystem::path path = base / file;
        out[it->second].series.push_back(
            read_series_csv(path, path.stem().string()));
    }
    for (const auto& dataset : out) dataset.validate();
    if (out.empty()) throw DataError(manifest_path.string() + ": manifest lists no series");
    return out;
}

Dataset load_dataset_split(const std::filesystem::path& manifest_path, const std::string& split) {
    auto all = load_datasets(manifest_path);
    for (auto& dataset : all) {
        if (dataset.split == split) return std::move(dataset);
    }
    throw DataError(manifest_path.string() + ": no series tagged split '" + split + "'");
}

void write_trace_csv(const std::filesystem::path& path, const ScoreTrace& trace) {
    auto out = open_out(path);
    out << "timestamp,score,probability\n";
    for (std::size_t t = 0; t < trace.timestamps.size(); ++t) {
        out << format_double(trace.timestamps[t]) << ',';
        if (trace.scored[t]) {
            out << format_double(trace.scores[t]) << ',' << format_double(trace.probabilities[t]);
        } else {
            out << "nan,nan";
        }
        out << '\n';
    }
    finish_out(out, path);
}

ScoreTrace read_trace_csv(const std::filesystem::path& path, const std::string& id) {
    const auto lines = read_lines(path);
    require_columns(split_csv(lines[0], row_context(path, 0)),
                    {"timestamp", "score", "probability"}, path.string());
    ScoreTrace trace;
    trace.series_id = id;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto ctx = row_context(path, i);
        const auto fields = split_csv(lines[i], ctx);
        if (fields.size() != 3) throw DataError(ctx + ": expected 3 fields");
        trace.timestamps.push_back(parse_double(fields[0], ctx + " timestamp"));
        const double score = parse_double(fields[1], ctx + " score");
        const double prob = parse_double(fields[2], ctx + " probability");
        const bool scored = !std::isnan(score);
        if (scored == std::isnan(prob)) {
            throw DataError(ctx + ": score and probability must be nan together");
        }
        trace.scored.push_back(scored);
        trace.scores.push_back(scored ? score : 0.0);
        trace.probabilities.push_back(scored ? prob : 0.0);
    }
    return trace;
}

void write_threshold_json(const std::filesystem::path& path, double threshold) {
    write_json_file(path, nlohmann::json{{"threshold", threshold}});
}

double read_threshold_json(const std::filesystem::path& path) {
    const auto j = read_json_file(path);
    if (!j.contains("threshold") || !j.at("threshold").is_number()) {
        throw DataError(path.string() + ": expected {\"threshold\": <real>}");
    }
    return j.at("threshold").get<double>();
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
    finish_out(out, path);
}

namespace {

constexpr char kNpyMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

std::string npy_dict_value(const std::string& header, const std::string& key,
                           const std::string& context) {
    const auto at = header.find("'" + key + "'");
    if (at == std::string::npos) throw DataError(context + ": header lacks '" + key + "'");
    auto from = header.find(':', at);
    if (from == std::string::npos) throw DataError(context + ": malformed header");
    ++from;
    while (from < header.size() && header[from] == ' ') ++from;
    auto to = from;
    if (header[from] == '\'') {
        to = header.find('\'', from + 1);
        if (to == std::string::npos) throw DataError(context + ": malformed header");
        return header.substr(from + 1, to - from - 1);
    }
    if (header[from] == '(') {
        to = header.find(')', from);
        if (to == std::string::npos) throw DataError(context + ": malformed header");
        return header.substr(from, to - from + 1);
    }
    while (to < header.size() && header[to] != ',' && header[to] != '}') ++to;
    auto value = header.substr(from, to - from);
    while (!value.empty() && value.back() == ' ') value.pop_back();
    return value;
}

}  // namespace

NpyArray read_npy(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    char magic[6];
    if (!in.read(magic, 6) || std::memcmp(magic, kNpyMagic, 6) != 0) {
        throw DataError(path.string() + ": not an npy file");
    }
    unsigned char version[2];
    if (!in.read(reinterpret_cast<char*>(version), 2)) {
        throw DataError(path.string() + ": truncated npy header");
    }
    std::uint32_t header_len = 0;
    if (version[0] == 1) {
        unsigned char raw[2];
        if (!in.read(reinterpret_cast<char*>(raw), 2)) {
            throw DataError(path.string() + ": truncated npy header");
        }
        header_len = raw[0] | (static_cast<std::uint32_t>(raw[1]) << 8);
    } else if (version[0] == 2 || version[0] == 3) {
        unsigned char raw[4];
        if (!in.read(reinterpret_cast<char*>(raw), 4)) {
            throw DataError(path.string() + ": truncated npy header");
        }
        header_len = raw[0] | (static_cast<std::uint32_t>(raw[1]) << 8) |
                     (static_cast<std::uint32_t>(raw[2]) << 16) |
                     (static_cast<std::uint32_t>(raw[3]) << 24);
    } else {
        throw DataError(path.string() + ": unsupported npy version " +
                        std::to_string(version[0]));
    }
    std::string header(header_len, '\0');
    if (!in.read(header.data(), header_len)) {
        throw DataError(path.string() + ": truncated npy header");
    }

    const auto descr = npy_dict_value(header, "descr", path.string());
    if (descr != "<f8" && descr != "<f4") {
        throw DataError(path.string() + ": unsupported dtype '" + descr +
                        "' (need <f8 or <f4)");
    }
    if (npy_dict_value(header, "fortran_order", path.string()) != "False") {
        throw DataError(path.string() + ": fortran-ordered arrays are unsupported");
    }
    const auto shape = npy_dict_value(header, "shape", path.string());
    std::vector<std::int64_t> dims;
    std::string token;
    for (std::size_t i = 1; i + 1 <= shape.size(); ++i) {
        const char c = shape[i];
        if (c >= '0' && c <= '9') {
            token.push_back(c);
        } else if (!token.empty()) {
            dims.push_back(parse_int(token, path.string() + " shape"));
            token.clear();
        }
    }
    if (dims.empty() || dims.size() > 2) {
        throw DataError(path.string() + ": need a rank-1 or rank-2 array, shape " + shape);
    }

    NpyArray array;
    array.rows = dims[0];
    array.cols = dims.size() == 2 ? dims[1] : 1;
    if (array.rows < 1 || array.cols < 1) {
        throw DataError(path.string() + ": empty array");
    }
    const auto count = static_cast<std::size_t>(array.rows * array.cols);
    const std::size_t item = descr == "<f8" ? 8 : 4;
    std::vector<char> data(count * item);
    if (!in.read(data.data(), static_cast<std::streamsize>(data.size()))) {
        throw DataError(path.string() + ": truncated npy data");
    }
    if (in.get() != std::ifstream::traits_type::eof()) {
        throw DataError(path.string() + ": trailing bytes after npy data");
    }
    array.values.resize(count);
    if (descr == "<f8") {
        std::memcpy(array.values.data(), data.data(), data.size());
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            float f;
            std::memcpy(&f, data.data() + i * 4, 4);
            array.values[i] = static_cast<double>(f);
        }
    }
    return array;
}

void write_npy(const std::filesystem::path& path, const NpyArray& array) {
    if (array.rows < 1 || array.cols < 1 ||
        array.values.size() != static_cast<std::size_t>(array.rows * array.cols)) {
        throw DataError("write_npy: value buffer does not match rows*cols");
    }
    std::string dict = "{'descr': '<f8', 'fortran_order': False, 'shape': (" +
                       std::to_string(array.rows) + ", " + std::to_string(array.cols) + "), }";
    // Magic + version + u16 length + dict padded to a 64-byte boundary.
    const std::size_t unpadded = 10 + dict.size() + 1;
    dict.append((64 - unpadded % 64) % 64, ' ');
    dict.push_back('\n');

    auto out = open_out(path);
    out.write(kNpyMagic, 6);
    const unsigned char version[2] = {1, 0};
    out.write(reinterpret_cast<const char*>(version), 2);
    const auto len = static_cast<std::uint16_t>(dict.size());
    const unsigned char raw[2] = {static_cast<unsigned char>(len & 0xFF),
                                  static_cast<unsigned char>(len >> 8)};
    out.write(reinterpret_cast<const char*>(raw), 2);
    out.write(dict.data(), static_cast<std::streamsize>(dict.size()));
    out.write(reinterpret_cast<const char*>(array.values.data()),
              static_cast<std::streamsize>(array.values.size() * 8));
    finish_out(out, path);
}

namespace {

TimeSeries series_from_matrix(std::string id, const NpyArray& array, LabelState fill) {
    TimeSeries s;
    s.id = std::move(id);
    s.length = array.rows;
    s.channels = array.cols;
    s.values = array.values;
    s.timestamps.resize(static_cast<std::size_t>(array.rows));
    for (std::int64_t t = 0; t < array.rows; ++t) {
        s.timestamps[static_cast<std::size_t>(t)] = static_cast<double>(t);
    }
    s.labels.assign(static_cast<std::size_t>(array.rows), fill);
    return s;
}

}  // namespace

std::vector<Dataset> nasa_format(const std::filesystem::path& dir) {
    const auto index = dir / "labeled_anomalies.csv";
    const auto lines = read_lines(index);
    require_columns(split_csv(lines[0], row_context(index, 0)),
                    {"chan_id", "spacecraft", "anomaly_sequences", "class", "num_values"},
                    index.string());

    Dataset train, test;
    train.split = "train";
    test.split = "test";
    std::unordered_set<std::string> seen;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto ctx = row_context(index, i);
        const auto fields = split_csv(lines[i], ctx);
        if (fields.size() != 5) throw DataError(ctx + ": expected 5 fields");
        const auto& chan = fields[0];
        if (!seen.insert(chan).second) {
            throw DataError(ctx + ": duplicate channel '" + chan + "'");
        }

        train.series.push_back(series_from_matrix(
            chan, read_npy(dir / "train" / (chan + ".npy")), LabelState::Unlabeled));
        auto series = series_from_matrix(chan, read_npy(dir / "test" / (chan + ".npy")),
                                         LabelState::Normal);

        nlohmann::json ranges;
        try {
            ranges = nlohmann::json::parse(fields[2]);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(ctx + ": anomaly_sequences: " + e.what());
        }
        if (!ranges.is_array()) throw DataError(ctx + ": anomaly_sequences must be a list");
        for (const auto& range : ranges) {
            if (!range.is_array() || range.size() != 2 || !range[0].is_number_integer() ||
                !range[1].is_number_integer()) {
                throw DataError(ctx + ": anomaly ranges must be [start, end] pairs");
            }
            const auto lo = range[0].get<std::int64_t>();
            const auto hi = range[1].get<std::int64_t>();
            if (lo < 0 || hi < lo || hi >= series.length) {
                throw DataError(ctx + ": range [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "] outside test length " +
                                std::to_string(series.length));
            }
            for (std::int64_t t = lo; t <= hi; ++t) {
                series.labels[static_cast<std::size_t>(t)] = LabelState::Anomalous;
            }
        }
        test.series.push_back(std::move(series));
    }
    if (train.series.empty()) throw DataError(index.string() + ": no channels listed");
    return {std::move(train), std::move(test)};
}

namespace {

std::vector<std::filesystem::path> sorted_files(const std::filesystem::path& dir,
                                                const std::string& extension) {
    if (!std::filesystem::is_directory(dir)) {
        throw DataError("'" + dir.string() + "' is not a directory");
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == extension) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw DataError("'" + dir.string() + "' holds no " + extension + " files");
    }
    return files;
}

TimeSeries read_smd_matrix(const std::filesystem::path& path, const std::string& id,
                           LabelState fill) {
    const auto lines = read_lines(path);
    TimeSeries s;
    s.id = id;
    s.channels = static_cast<std::int64_t>(split_csv(lines[0], row_context(path, 0)).size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto ctx = row_context(path, i);
        const auto fields = split_csv(lines[i], ctx);
        if (static_cast<std::int64_t>(fields.size()) != s.channels) {
            throw DataError(ctx + ": expected " + std::to_string(s.channels) + " values");
        }
        for (const auto& field : fields) s.values.push_back(parse_double(field, ctx));
        s.timestamps.push_back(static_cast<double>(i));
        s.labels.push_back(fill);
    }
    s.length = static_cast<std::int64_t>(lines.size());
    return s;
}

}  // namespace

std::vector<Dataset> smd_format(const std::filesystem::path& dir) {
    Dataset train, test;
    train.split = "train";
    test.split = "test";
    for (const auto& path : sorted_files(dir / "train", ".txt")) {
        const auto id = path.stem().string();
        train.series.push_back(read_smd_matrix(path, id, LabelState::Normal));

        const auto test_path = dir / "test" / path.filename();
        const auto label_path = dir / "test_label" / path.filename();
        auto series = read_smd_matrix(test_path, id, LabelState::Normal);
        const auto labels = read_lines(label_path);
        if (static_cast<std::int64_t>(labels.size()) != series.length) {
            throw DataError(label_path.string() + ": " + std::to_string(labels.size()) +
                            " labels for " + std::to_string(series.length) + " timesteps");
        }
        for (std::size_t t = 0; t < labels.size(); ++t) {
            const auto v = parse_int(labels[t], row_context(label_path, t));
            if (v != 0 && v != 1) {
                throw DataError(row_context(label_path, t) + ": labels must be 0 or 1");
            }
            series.labels[t] = v == 1 ? LabelState::Anomalous : LabelState::Normal;
        }
        test.series.push_back(std::move(series));
    }
    return {std::move(train), std::move(test)};
}

std::vector<Dataset> yahoo_format(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw DataError("'" + dir.string() + "' is not a directory");
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("'" + dir.string() + "' holds no .csv files");

    const std::vector<std::string> real_header{"timestamp", "value", "is_anomaly"};
    const std::vector<std::string> synthetic_header{
        "timestamps", "value",        "anomaly",      "changepoint", "trend",
        "noise",      "seasonality1", "seasonality2", "seasonality3"};

    Dataset train, validation, test;
    train.split = "train";
    validation.split = "validation";
    test.split = "test";
    for (const auto& path : files) {
        const auto lines = read_lines(path);
        const auto header = split_csv(lines[0], row_context(path, 0));
        bool synthetic = false;
        if (header == real_header) {
            synthetic = false;
        } else if (header == synthetic_header) {
            synthetic = true;
        } else {
            // Name the first unrecognized column for the error.
            require_columns(header, header.size() > 3 ? synthetic_header : real_header,
                            path.string());
            throw DataError(path.string() + ": columns are out of order");
        }

        TimeSeries series;
        series.id = path.stem().string();
        series.channels = 1;
        for (std::size_t i = 1; i < lines.size(); ++i) {
            const auto ctx = row_context(path, i);
            const auto fields = split_csv(lines[i], ctx);
            if (fields.size() != header.size()) {
                throw DataError(ctx + ": expected " + std::to_string(header.size()) + " fields");
            }
            series.timestamps.push_back(parse_double(fields[0], ctx + " timestamp"));
            series.values.push_back(parse_double(fields[1], ctx + " value"));
            const auto flag = parse_int(fields[2], ctx + " anomaly");
            if (flag != 0 && flag != 1) {
                throw DataError(ctx + ": anomaly flag must be 0 or 1");
            }
            series.labels.push_back(flag == 1 ? LabelState::Anomalous : LabelState::Normal);
            (void)synthetic;  // generator columns carry no signal for detection
        }
        series.length = static_cast<std::int64_t>(series.labels.size());

        auto splits = split_yahoo_style(series);
        train.series.push_back(std::move(splits.train));
        validation.series.push_back(std::move(splits.validation));
        test.series.push_back(std::move(splits.test));
    }
    return {std::move(train), std::move(validation), std::move(test)};
}

std::vector<Dataset> kpi_format(const std::filesystem::path& file) {
    const auto lines = read_lines(file);
    require_columns(split_csv(lines[0], row_context(file, 0)),
                    {"timestamp", "value", "label", "KPI ID"}, file.string());

    Dataset out;
    out.split = "train";
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto ctx = row_context(file, i);
        const auto fields = split_csv(lines[i], ctx);
        if (fields.size() != 4) throw DataError(ctx + ": expected 4 fields");
        const auto& id = fields[3];
        auto [it, fresh] = index.emplace(id, out.series.size());
        if (fresh) {
            out.series.emplace_back();
            out.series.back().id = id;
            out.series.back().channels = 1;
        }
        auto& series = out.series[it->second];
        series.timestamps.push_back(parse_double(fields[0], ctx + " timestamp"));
        series.values.push_back(parse_double(fields[1], ctx + " value"));
        const auto flag = parse_int(fields[2], ctx + " label");
        if (flag != 0 && flag != 1) throw DataError(ctx + ": label must be 0 or 1");
        series.labels.push_back(flag == 1 ? LabelState::Anomalous : LabelState::Normal);
    }
    for (auto& series : out.series) {
        series.length = static_cast<std::int64_t>(series.labels.size());
    }
    if (out.series.empty()) throw DataError(file.string() + ": no data rows");
    return {std::move(out)};
}

}  // namespace ncad
