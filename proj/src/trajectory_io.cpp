#include "shipcc/trajectory_io.hpp"

#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "shipcc/errors.hpp"

namespace shipcc {

namespace {

constexpr char kMatrixMagic[4] = {'S', 'H', 'P', 'M'};
constexpr char kBundleMagic[4] = {'S', 'H', 'P', 'B'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw IoError("truncated binary file");
    return v;
}

void put_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
    os.write(kMatrixMagic, 4);
    put<std::uint32_t>(os, kVersion);
    put<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
    os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Eigen::MatrixXd get_matrix(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMatrixMagic, 4) != 0) throw IoError("not a matrix block");
    if (get<std::uint32_t>(is) != kVersion) throw IoError("unsupported matrix version");
    const auto rows = get<std::uint64_t>(is);
    const auto cols = get<std::uint64_t>(is);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!is) throw IoError("truncated matrix data");
    return m;
}

std::ofstream open_out(const std::filesystem::path& file, bool binary) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream os(file, binary ? std::ios::binary : std::ios::out);
    if (!os) throw IoError("cannot write " + file.string());
    return os;
}

std::ifstream open_in(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw IoError("cannot read " + file.string());
    return is;
}

}  // namespace

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_matrix(const std::filesystem::path& file, const Eigen::MatrixXd& m) {
    auto os = open_out(file, true);
    put_matrix(os, m);
}

Eigen::MatrixXd read_matrix(const std::filesystem::path& file) {
    auto is = open_in(file);
    return get_matrix(is);
}

void write_bundle(const std::filesystem::path& file, const MatrixBundle& bundle) {
    auto os = open_out(file, true);
    os.write(kBundleMagic, 4);
    put<std::uint32_t>(os, kVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(bundle.size()));
    for (const auto& [name, m] : bundle) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_matrix(os, m);
    }
}

MatrixBundle read_bundle(const std::filesystem::path& file) {
    auto is = open_in(file);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kBundleMagic, 4) != 0) throw IoError("not a bundle: " + file.string());
    if (get<std::uint32_t>(is) != kVersion) throw IoError("unsupported bundle version");
    const auto count = get<std::uint32_t>(is);
    MatrixBundle b;
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto len = get<std::uint32_t>(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        b[name] = get_matrix(is);
    }
    return b;
}

void write_trajectory(const std::filesystem::path& file, const Trajectory& t) {
    MatrixBundle b;
    b["X"] = t.X;
    b["Z"] = t.Z;
    b["U"] = t.U;
    b["P"] = t.P;
    b["Y"] = t.Y;
    b["sample_period"] = Eigen::MatrixXd::Constant(1, 1, t.sample_period);
    write_bundle(file, b);
}

Trajectory read_trajectory(const std::filesystem::path& file) {
    MatrixBundle b = read_bundle(file);
    for (const char* key : {"X", "Z", "U", "P", "Y", "sample_period"})
        if (!b.count(key)) throw IoError(std::string("trajectory file lacks ") + key);
    Trajectory t;
    t.X = b["X"];
    t.Z = b["Z"];
    t.U = b["U"];
    t.P = b["P"].col(0);
    t.Y = b["Y"];
    t.sample_period = b["sample_period"](0, 0);
    if (t.X.cols() != kNx || t.Z.cols() != kNz || t.U.cols() != kNu || t.Y.cols() != kNy)
        throw IoError("trajectory dimensions do not match the plant layout");
    return t;
}

void write_trajectory_csv(const std::filesystem::path& file, const Trajectory& t) {
    auto os = open_out(file, false);
    os << "t";
    for (int i = 1; i <= kNx; ++i) os << ",x" << i;
    for (int i = 1; i <= kNz; ++i) os << ",z" << i;
    for (int i = 1; i <= kNu; ++i) os << ",u" << i;
    os << ",p,y1,y2\n";
    const long N = t.steps();
    for (long k = 0; k <= N; ++k) {
        const long held = N == 0 ? -1 : std::min(k, N - 1);
        os << format_double(k * t.sample_period);
        for (int i = 0; i < kNx; ++i) os << ',' << format_double(t.X(k, i));
        for (int i = 0; i < kNz; ++i) os << ',' << format_double(t.Z(k, i));
        for (int i = 0; i < kNu; ++i) os << ',' << (held >= 0 ? format_double(t.U(held, i)) : "");
        os << ',' << (held >= 0 ? format_double(t.P[held]) : "");
        os << ',' << format_double(t.Y(k, 0)) << ',' << format_double(t.Y(k, 1)) << '\n';
    }
}

}  // namespace shipcc
