#include "evadkit/event_model.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace evadkit {

namespace {

void put_bytes(std::string& out, const void* p, std::size_t n) {
    out.append(static_cast<const char*>(p), n);
}

template <typename T>
void put_le(std::string& out, T v) {
    unsigned char bytes[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
        bytes[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
    put_bytes(out, bytes, sizeof(T));
}

void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    put_le(out, bits);
}

template <typename T>
T get_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(T)))
        throw IoError(IoError::Kind::Truncated, "evs: unexpected end of data");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return static_cast<T>(v);
}

double get_f64(std::istream& in) {
    std::uint64_t bits = get_le<std::uint64_t>(in);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

constexpr char kMagic[4] = {0x45, 0x56, 0x53, 0x31};  // "EVS1"

}  // namespace

ValidationReport validate_stream(const EventStream& stream) {
    ValidationReport report;
    std::uint64_t prev_t = 0;
    for (std::size_t i = 0; i < stream.events.size(); ++i) {
        const Event& e = stream.events[i];
        if (i > 0 && e.t_us < prev_t) {
            report.violations.push_back({Violation::Kind::UnsortedTimestamp, i,
                                         "timestamp decreases at event " + std::to_string(i)});
        }
        prev_t = e.t_us;
        if (e.t_us > stream.duration_us) {
            report.violations.push_back({Violation::Kind::TimestampPastDuration, i,
                                         "timestamp exceeds stream duration"});
        }
        if (e.x >= stream.width) {
            report.violations.push_back({Violation::Kind::OutOfBoundsX, i,
                                         "x=" + std::to_string(e.x) + " outside width " +
                                             std::to_string(stream.width)});
        }
        if (e.y >= stream.height) {
            report.violations.push_back({Violation::Kind::OutOfBoundsY, i,
                                         "y=" + std::to_string(e.y) + " outside height " +
                                             std::to_string(stream.height)});
        }
        if (e.polarity != 1 && e.polarity != -1) {
            report.violations.push_back({Violation::Kind::BadPolarity, i,
                                         "polarity must be +1 or -1"});
        }
    }
    return report;
}

std::size_t write_evs(const EventStream& stream, std::ostream& sink) {
    std::string header;
    put_bytes(header, kMagic, 4);
    put_le<std::uint32_t>(header, stream.width);
    put_le<std::uint32_t>(header, stream.height);
    put_le<std::uint64_t>(header, stream.duration_us);
    put_f64(header, stream.source_fps);
    put_le<std::uint64_t>(header, stream.events.size());

    std::string payload;
    payload.reserve(stream.events.size() * 13);
    for (const Event& e : stream.events) {
        put_le<std::uint64_t>(payload, e.t_us);
        put_le<std::uint16_t>(payload, e.x);
        put_le<std::uint16_t>(payload, e.y);
        put_le<std::uint8_t>(payload, static_cast<std::uint8_t>(e.polarity));
    }

    std::string trailer;
    put_le<std::uint32_t>(trailer, crc32(payload.data(), payload.size()));

    sink.write(header.data(), static_cast<std::streamsize>(header.size()));
    sink.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    sink.write(trailer.data(), static_cast<std::streamsize>(trailer.size()));
    return header.size() + payload.size() + trailer.size();
}

EventStream read_evs(std::istream& source) {
    char magic[4];
    source.read(magic, 4);
    if (source.gcount() != 4)
        throw IoError(IoError::Kind::Truncated, "evs: file shorter than magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw IoError(IoError::Kind::BadMagic, "evs: bad magic bytes");

    EventStream stream;
    stream.width = get_le<std::uint32_t>(source);
    stream.height = get_le<std::uint32_t>(source);
    stream.duration_us = get_le<std::uint64_t>(source);
    stream.source_fps = get_f64(source);
    std::uint64_t count = get_le<std::uint64_t>(source);

    std::string payload(count * 13, '\0');
    source.read(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (source.gcount() != static_cast<std::streamsize>(payload.size()))
        throw IoError(IoError::Kind::Truncated, "evs: truncated event payload");

    std::uint32_t stored_crc = get_le<std::uint32_t>(source);
    if (stored_crc != crc32(payload.data(), payload.size()))
        throw IoError(IoError::Kind::BadChecksum, "evs: payload checksum mismatch");

    stream.events.resize(count);
    std::istringstream ps(payload);
    for (std::uint64_t i = 0; i < count; ++i) {
        Event& e = stream.events[i];
        e.t_us = get_le<std::uint64_t>(ps);
        e.x = get_le<std::uint16_t>(ps);
        e.y = get_le<std::uint16_t>(ps);
        e.polarity = static_cast<std::int8_t>(get_le<std::uint8_t>(ps));
    }
    return stream;
}

std::size_t write_evs_file(const EventStream& stream, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError(IoError::Kind::Missing, "cannot open for writing: " + path);
    std::size_t n = write_evs(stream, out);
    out.flush();
    if (!out)
        throw IoError(IoError::Kind::Truncated, "short write: " + path);
    return n;
}

EventStream read_evs_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(IoError::Kind::Missing, "cannot open: " + path);
    return read_evs(in);
}

void sort_events(std::vector<Event>& events) {
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.t_us < b.t_us; });
}

CsvReadResult read_csv_events(std::istream& source, std::uint32_t width, std::uint32_t height) {
    CsvReadResult result;
    result.stream.width = width;
    result.stream.height = height;

    std::string line;
    std::size_t row = 0;
    while (std::getline(source, line)) {
        ++row;
        if (line.empty()) continue;
        long long t, x, y, p;
        char c1, c2, c3;
        std::istringstream ls(line);
        if (!(ls >> t >> c1 >> x >> c2 >> y >> c3 >> p) || c1 != ',' || c2 != ',' || c3 != ',')
            throw IoError(IoError::Kind::Parse, "csv: unparsable row " + std::to_string(row));
        if (t < 0)
            throw IoError(IoError::Kind::Parse, "csv: negative timestamp at row " + std::to_string(row));
        if (x < 0 || static_cast<std::uint64_t>(x) >= width || y < 0 ||
            static_cast<std::uint64_t>(y) >= height)
            throw IoError(IoError::Kind::OutOfBounds,
                          "csv: coordinate out of bounds at row " + std::to_string(row));
        std::int8_t pol;
        if (p == 1) pol = 1;
        else if (p == -1 || p == 0) pol = -1;
        else
            throw IoError(IoError::Kind::Parse, "csv: bad polarity at row " + std::to_string(row));
        result.stream.events.push_back({static_cast<std::uint64_t>(t),
                                        static_cast<std::uint16_t>(x),
                                        static_cast<std::uint16_t>(y), pol});
    }

    for (std::size_t i = 1; i < result.stream.events.size(); ++i) {
        if (result.stream.events[i].t_us < result.stream.events[i - 1].t_us) {
            result.was_unsorted = true;
            break;
        }
    }
    if (result.was_unsorted) sort_events(result.stream.events);
    if (!result.stream.events.empty())
        result.stream.duration_us = result.stream.events.back().t_us;
    return result;
}

}  // namespace evadkit
