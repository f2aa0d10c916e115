#include "uwf/npy.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace uwf {

namespace {

const char kMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

std::string format_shape(const std::vector<std::int64_t>& shape) {
    std::ostringstream os;
    os << '(';
    for (size_t i = 0; i < shape.size(); ++i) {
        os << shape[i];
        if (shape.size() == 1 || i + 1 < shape.size()) os << ',';
        if (i + 1 < shape.size()) os << ' ';
    }
    os << ')';
    return os.str();
}

// Pull the value of a 'key': ... entry out of the header dict. The dict is
// machine-written with a known key set, so plain string scanning is enough.
std::string dict_value(const std::string& header, const std::string& key) {
    auto pos = header.find("'" + key + "'");
    if (pos == std::string::npos)
        throw FormatError("npy: header missing key '" + key + "'");
    pos = header.find(':', pos);
    if (pos == std::string::npos)
        throw FormatError("npy: malformed header near '" + key + "'");
    ++pos;
    while (pos < header.size() && header[pos] == ' ') ++pos;
    size_t end = pos;
    if (pos < header.size() && header[pos] == '(') {
        end = header.find(')', pos);
        if (end == std::string::npos) throw FormatError("npy: unterminated shape tuple");
        ++end;
    } else {
        while (end < header.size() && header[end] != ',' && header[end] != '}') ++end;
    }
    return header.substr(pos, end - pos);
}

std::vector<std::int64_t> parse_shape(const std::string& tuple) {
    if (tuple.size() < 2 || tuple.front() != '(' || tuple.back() != ')')
        throw FormatError("npy: shape is not a tuple: " + tuple);
    std::vector<std::int64_t> shape;
    std::string body = tuple.substr(1, tuple.size() - 2);
    std::istringstream is(body);
    std::string item;
    while (std::getline(is, item, ',')) {
        bool digits = false;
        std::int64_t v = 0;
        for (char c : item) {
            if (c == ' ') continue;
            if (c < '0' || c > '9') throw FormatError("npy: bad shape entry: " + item);
            v = v * 10 + (c - '0');
            digits = true;
        }
        if (digits) shape.push_back(v);
    }
    return shape;
}

} // namespace

NpyArray read_npy(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("npy: cannot open " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (bytes.size() < 10 || std::memcmp(bytes.data(), kMagic, 6) != 0)
        throw FormatError("npy: bad magic in " + path);
    const unsigned char major = bytes[6], minor = bytes[7];
    if (major != 1 || minor != 0)
        throw UnsupportedError("npy: only format version 1.0 is handled, got " +
                               std::to_string(major) + "." + std::to_string(minor));
    const size_t header_len = size_t(static_cast<unsigned char>(bytes[8])) |
                              (size_t(static_cast<unsigned char>(bytes[9])) << 8);
    if (bytes.size() < 10 + header_len)
        throw FormatError("npy: truncated header in " + path);
    const std::string header(bytes.data() + 10, header_len);

    const std::string descr = dict_value(header, "descr");
    const std::string order = dict_value(header, "fortran_order");
    const auto shape = parse_shape(dict_value(header, "shape"));

    if (order.find("True") != std::string::npos)
        throw UnsupportedError("npy: fortran-order arrays are not handled");
    if (order.find("False") == std::string::npos)
        throw FormatError("npy: unreadable fortran_order entry: " + order);

    size_t itemsize = 0;
    if (descr.find("<f8") != std::string::npos) itemsize = 8;
    else if (descr.find("<f4") != std::string::npos) itemsize = 4;
    else throw UnsupportedError("npy: dtype " + descr + " is not handled (need '<f4' or '<f8')");

    NpyArray out;
    out.shape = shape;
    const std::int64_t count = out.element_count();
    const size_t data_offset = 10 + header_len;
    if (bytes.size() - data_offset < size_t(count) * itemsize)
        throw FormatError("npy: data section shorter than the header promises in " + path);

    out.data.resize(count);
    const char* p = bytes.data() + data_offset;
    if (itemsize == 8) {
        std::memcpy(out.data.data(), p, size_t(count) * 8);
    } else {
        for (std::int64_t i = 0; i < count; ++i) {
            float f;
            std::memcpy(&f, p + i * 4, 4);
            out.data[i] = double(f);
        }
    }
    return out;
}

void write_npy(const std::string& path, const NpyArray& array) {
    if (std::int64_t(array.data.size()) != array.element_count())
        throw ContractError("write_npy: data length does not match shape");

    std::string dict = "{'descr': '<f8', 'fortran_order': False, 'shape': " +
                       format_shape(array.shape) + ", }";
    // Pad with spaces, terminate with \n, so magic+version+len+header is a
    // multiple of 64 and the data section is alignment-friendly.
    size_t total = 10 + dict.size() + 1;
    size_t padded = (total + 63) / 64 * 64;
    dict.append(padded - total, ' ');
    dict.push_back('\n');
    if (dict.size() > 0xffff)
        throw ContractError("write_npy: header too long for format version 1.0");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("npy: cannot open " + path + " for writing");
    out.write(kMagic, 6);
    const unsigned char version[2] = {1, 0};
    out.write(reinterpret_cast<const char*>(version), 2);
    const unsigned char len[2] = {static_cast<unsigned char>(dict.size() & 0xff),
                                  static_cast<unsigned char>(dict.size() >> 8)};
    out.write(reinterpret_cast<const char*>(len), 2);
    out.write(dict.data(), std::streamsize(dict.size()));
    out.write(reinterpret_cast<const char*>(array.data.data()),
              std::streamsize(array.data.size() * sizeof(double)));
    if (!out) throw FormatError("npy: short write to " + path);
}

NpyArray npy_from_series(const FieldSeries& series) {
    NpyArray out;
    out.shape = {std::int64_t(series.frames.size()), series.spec.ny, series.spec.nx};
    out.data.reserve(size_t(out.element_count()));
    for (const auto& f : series.frames)
        out.data.insert(out.data.end(), f.values.data(), f.values.data() + f.values.size());
    return out;
}

FieldSeries series_from_npy(const NpyArray& array, double dx, double dt) {
    if (array.shape.size() != 3)
        throw ContractError("series_from_npy: expected a (T, H, W) array");
    const int T = int(array.shape[0]), H = int(array.shape[1]), W = int(array.shape[2]);
    FieldSeries s;
    s.spec = GridSpec(W, H, dx);
    s.dt = dt;
    s.frames.assign(T, ScalarField(s.spec));
    for (int t = 0; t < T; ++t)
        std::memcpy(s.frames[t].values.data(), array.data.data() + std::int64_t(t) * H * W,
                    size_t(H) * W * sizeof(double));
    return s;
}

NpyArray npy_from_field(const ScalarField& field) {
    NpyArray out;
    out.shape = {field.spec.ny, field.spec.nx};
    out.data.assign(field.values.data(), field.values.data() + field.values.size());
    return out;
}

ScalarField field_from_npy(const NpyArray& array, double dx) {
    if (array.shape.size() != 2)
        throw ContractError("field_from_npy: expected a (H, W) array");
    ScalarField f(GridSpec(int(array.shape[1]), int(array.shape[0]), dx));
    std::memcpy(f.values.data(), array.data.data(), array.data.size() * sizeof(double));
    return f;
}

} // namespace uwf
