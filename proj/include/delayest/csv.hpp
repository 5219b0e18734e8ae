#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "criteria.hpp"
#include "estimator.hpp"

namespace delayest {

/// Malformed CSV input; line_number() is 1-based and counts the header.
class CsvError : public std::runtime_error {
public:
    CsvError(const std::string& what, long line_number)
        : std::runtime_error("line " + std::to_string(line_number) + ": " + what),
          line_number_(line_number) {}

    long line_number() const noexcept { return line_number_; }

private:
    long line_number_;
};

namespace detail {

/// Shortest decimal form that round-trips a double exactly.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = line.find(',', pos);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(pos));
            return out;
        }
        out.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
}

inline double parse_double(std::string_view field, long line_number) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        throw CsvError("expected a number, got '" + std::string(field) + "'", line_number);
    return v;
}

inline long parse_long(std::string_view field, long line_number) {
    long v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        throw CsvError("expected an integer, got '" + std::string(field) + "'", line_number);
    return v;
}

/// Reads one line, tolerating a trailing carriage return and a missing
/// final newline. Returns false at end of input.
inline bool read_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    return out;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    return in;
}

}  // namespace detail

struct SampleRecord {
    std::vector<Sample> samples;
    Index num_inputs = 0;
    Index num_outputs = 0;
};

/// Writes rows `k,u1,...,um,y1,...,yl` with full-precision values.
inline void write_samples_csv(std::ostream& out, std::span<const Sample> samples,
                              Index num_inputs, Index num_outputs) {
    out << 'k';
    for (Index c = 0; c < num_inputs; ++c) out << ",u" << c + 1;
    for (Index c = 0; c < num_outputs; ++c) out << ",y" << c + 1;
    out << '\n';
    for (std::size_t k = 0; k < samples.size(); ++k) {
        out << k;
        for (Index c = 0; c < num_inputs; ++c)
            out << ',' << detail::format_double(samples[k].u(c));
        for (Index c = 0; c < num_outputs; ++c)
            out << ',' << detail::format_double(samples[k].y(c));
        out << '\n';
    }
}

inline void write_samples_csv(const std::string& path, std::span<const Sample> samples,
                              Index num_inputs, Index num_outputs) {
    auto out = detail::open_out(path);
    write_samples_csv(out, samples, num_inputs, num_outputs);
}

/// Reads a sample record; input and output counts come from the header.
/// Rows must be contiguous from k = 0.
inline SampleRecord read_samples_csv(std::istream& in) {
    std::string line;
    if (!detail::read_line(in, line)) throw CsvError("empty file", 1);
    const auto header = detail::split_fields(line);
    if (header.empty() || header[0] != "k")
        throw CsvError("header must start with 'k'", 1);
    SampleRecord rec;
    std::size_t col = 1;
    while (col < header.size() && header[col] == "u" + std::to_string(rec.num_inputs + 1)) {
        ++rec.num_inputs;
        ++col;
    }
    while (col < header.size() && header[col] == "y" + std::to_string(rec.num_outputs + 1)) {
        ++rec.num_outputs;
        ++col;
    }
    if (col != header.size() || rec.num_inputs < 1 || rec.num_outputs < 1)
        throw CsvError("header must be k,u1,...,y1,...", 1);

    long line_number = 1;
    while (detail::read_line(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        const auto fields = detail::split_fields(line);
        if (static_cast<Index>(fields.size()) != 1 + rec.num_inputs + rec.num_outputs)
            throw CsvError("expected " +
                               std::to_string(1 + rec.num_inputs + rec.num_outputs) +
                               " fields, got " + std::to_string(fields.size()),
                           line_number);
        if (detail::parse_long(fields[0], line_number) !=
            static_cast<long>(rec.samples.size()))
            throw CsvError("sample indices must be contiguous from 0", line_number);
        Sample s{Vector(rec.num_inputs), Vector(rec.num_outputs)};
        for (Index c = 0; c < rec.num_inputs; ++c)
            s.u(c) = detail::parse_double(fields[1 + c], line_number);
        for (Index c = 0; c < rec.num_outputs; ++c)
            s.y(c) = detail::parse_double(fields[1 + rec.num_inputs + c], line_number);
        rec.samples.push_back(std::move(s));
    }
    return rec;
}

inline SampleRecord read_samples_csv(const std::string& path) {
    auto in = detail::open_in(path);
    return read_samples_csv(in);
}

/// True delays per sample, one output-major (output, input) grid per row.
struct TruthRecord {
    std::vector<std::vector<Index>> rows;  // each num_outputs * num_inputs long
    Index num_inputs = 0;
    Index num_outputs = 0;
};

/// Writes rows `k,T_1_1,...,T_l_m` (channel T_<output>_<input>).
inline void write_truth_csv(std::ostream& out, const TruthRecord& rec) {
    out << 'k';
    for (Index output = 0; output < rec.num_outputs; ++output)
        for (Index input = 0; input < rec.num_inputs; ++input)
            out << ",T_" << output + 1 << '_' << input + 1;
    out << '\n';
    for (std::size_t k = 0; k < rec.rows.size(); ++k) {
        out << k;
        for (Index v : rec.rows[k]) out << ',' << v;
        out << '\n';
    }
}

inline void write_truth_csv(const std::string& path, const TruthRecord& rec) {
    auto out = detail::open_out(path);
    write_truth_csv(out, rec);
}

inline TruthRecord read_truth_csv(std::istream& in) {
    std::string line;
    if (!detail::read_line(in, line)) throw CsvError("empty file", 1);
    const auto header = detail::split_fields(line);
    if (header.empty() || header[0] != "k")
        throw CsvError("header must start with 'k'", 1);
    TruthRecord rec;
    for (std::size_t col = 1; col < header.size(); ++col) {
        long output = 0, input = 0;
        if (std::sscanf(std::string(header[col]).c_str(), "T_%ld_%ld", &output, &input) != 2 ||
            output < 1 || input < 1)
            throw CsvError("bad truth column '" + std::string(header[col]) + "'", 1);
        rec.num_outputs = std::max<Index>(rec.num_outputs, output);
        rec.num_inputs = std::max<Index>(rec.num_inputs, input);
    }
    if (static_cast<Index>(header.size()) != 1 + rec.num_outputs * rec.num_inputs)
        throw CsvError("truth columns must cover every (output, input) pair", 1);

    long line_number = 1;
    while (detail::read_line(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        const auto fields = detail::split_fields(line);
        if (fields.size() != header.size())
            throw CsvError("expected " + std::to_string(header.size()) + " fields, got " +
                               std::to_string(fields.size()),
                           line_number);
        if (detail::parse_long(fields[0], line_number) != static_cast<long>(rec.rows.size()))
            throw CsvError("sample indices must be contiguous from 0", line_number);
        std::vector<Index> row(static_cast<std::size_t>(rec.num_outputs * rec.num_inputs));
        for (std::size_t c = 0; c < row.size(); ++c)
            row[c] = detail::parse_long(fields[1 + c], line_number);
        rec.rows.push_back(std::move(row));
    }
    return rec;
}

inline TruthRecord read_truth_csv(const std::string& path) {
    auto in = detail::open_in(path);
    return read_truth_csv(in);
}

/// Streams estimated-delay rows `k,d_1_1,...,d_l_m,v_1_1,...,v_l_m`
/// (v flags are 1 where the channel estimate is usable).
class TrajectoryWriter {
public:
    TrajectoryWriter(std::ostream& out, Index num_inputs, Index num_outputs)
        : out_(out), num_inputs_(num_inputs), num_outputs_(num_outputs) {
        out_ << 'k';
        for (Index output = 0; output < num_outputs_; ++output)
            for (Index input = 0; input < num_inputs_; ++input)
                out_ << ",d_" << output + 1 << '_' << input + 1;
        for (Index output = 0; output < num_outputs_; ++output)
            for (Index input = 0; input < num_inputs_; ++input)
                out_ << ",v_" << output + 1 << '_' << input + 1;
        out_ << '\n';
    }

    void write_row(long k, const DelayMatrix& dm) {
        if (dm.delays.rows() != num_outputs_ || dm.delays.cols() != num_inputs_)
            throw std::invalid_argument("TrajectoryWriter: delay grid shape mismatch");
        out_ << k;
        for (Index output = 0; output < num_outputs_; ++output)
            for (Index input = 0; input < num_inputs_; ++input)
                out_ << ',' << dm.delays(output, input);
        for (Index output = 0; output < num_outputs_; ++output)
            for (Index input = 0; input < num_inputs_; ++input)
                out_ << ',' << (dm.valid(output, input) ? 1 : 0);
        out_ << '\n';
    }

private:
    std::ostream& out_;
    Index num_inputs_, num_outputs_;
};

/// One estimated-delay row per sample, as read back from a trajectory file.
struct TrajectoryRecord {
    std::vector<long> k;
    std::vector<DelayMatrix> rows;
    Index num_inputs = 0;
    Index num_outputs = 0;
};

inline TrajectoryRecord read_trajectory_csv(std::istream& in) {
    std::string line;
    if (!detail::read_line(in, line)) throw CsvError("empty file", 1);
    const auto header = detail::split_fields(line);
    if (header.empty() || header[0] != "k")
        throw CsvError("header must start with 'k'", 1);
    TrajectoryRecord rec;
    std::size_t col = 1;
    for (; col < header.size() && header[col].starts_with("d_"); ++col) {
        long output = 0, input = 0;
        if (std::sscanf(std::string(header[col]).c_str(), "d_%ld_%ld", &output, &input) != 2)
            throw CsvError("bad trajectory column '" + std::string(header[col]) + "'", 1);
        rec.num_outputs = std::max<Index>(rec.num_outputs, output);
        rec.num_inputs = std::max<Index>(rec.num_inputs, input);
    }
    const Index grid = rec.num_outputs * rec.num_inputs;
    if (grid < 1 || static_cast<Index>(header.size()) != 1 + 2 * grid)
        throw CsvError("trajectory header must be k,d_...,v_...", 1);

    long line_number = 1;
    while (detail::read_line(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        const auto fields = detail::split_fields(line);
        if (static_cast<Index>(fields.size()) != 1 + 2 * grid)
            throw CsvError("expected " + std::to_string(1 + 2 * grid) + " fields, got " +
                               std::to_string(fields.size()),
                           line_number);
        rec.k.push_back(detail::parse_long(fields[0], line_number));
        DelayMatrix dm;
        dm.delays.resize(rec.num_outputs, rec.num_inputs);
        dm.valid.resize(rec.num_outputs, rec.num_inputs);
        for (Index output = 0; output < rec.num_outputs; ++output)
            for (Index input = 0; input < rec.num_inputs; ++input) {
                const std::size_t c = 1 + output * rec.num_inputs + input;
                dm.delays(output, input) = detail::parse_long(fields[c], line_number);
                dm.valid(output, input) =
                    detail::parse_long(fields[c + grid], line_number) != 0;
            }
        rec.rows.push_back(std::move(dm));
    }
    return rec;
}

inline TrajectoryRecord read_trajectory_csv(const std::string& path) {
    auto in = detail::open_in(path);
    return read_trajectory_csv(in);
}

/// Appends one impulse-response snapshot: a line with the sample index, then
/// horizon * num_outputs rows of num_inputs full-precision entries.
inline void write_markov_snapshot(std::ostream& out, long k, const MarkovEstimate& markov) {
    out << k << '\n';
    const Matrix block = markov.first_block_column();
    for (Index r = 0; r < block.rows(); ++r) {
        for (Index c = 0; c < block.cols(); ++c) {
            if (c) out << ',';
            out << detail::format_double(block(r, c));
        }
        out << '\n';
    }
}

}  // namespace delayest
