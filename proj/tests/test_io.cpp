#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

#include "fmlab/io.hpp"
#include "oracles.hpp"

using namespace fmlab;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("fmlab_io_" + name);
}

ErrorCode decode_error(const std::string& bytes) {
    try {
        io::decode_grid(bytes);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "decode accepted bad input";
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Mgf1, RoundTripIsBitExact) {
    for (int n : {1, 2}) {
        const GridSpec s(n, 16, 3.0);
        for (auto tag : {SupportTag::Periodic, SupportTag::Compact}) {
            const GridFunction f(s, oracle::random_values(s.size(), 21, -1e3, 1e3), tag);
            const auto path = temp_path("rt.mgf");
            io::write_grid(f, path);
            const auto g = io::read_grid(path);
            EXPECT_EQ(g.support(), tag);
            EXPECT_EQ(g.spec().dimension(), n);
            ASSERT_EQ(g.size(), f.size());
            EXPECT_EQ(std::memcmp(g.values().data(), f.values().data(), f.size() * sizeof(double)), 0);
            EXPECT_DOUBLE_EQ(g.spec().spacing(), s.spacing());
            std::filesystem::remove(path);
        }
    }
}

TEST(Mgf1, HeaderLayout) {
    const GridSpec s(1, 4, 2.0);
    const GridFunction f(s, {1.0, 2.0, 3.0, 4.0}, SupportTag::Compact);
    const auto bytes = io::encode_grid(f);
    ASSERT_EQ(bytes.size(), 4u + 4u + 4u + 8u + 1u + 4u * 8u);
    EXPECT_EQ(bytes.substr(0, 4), "MGF1");
    std::uint32_t n = 0, N = 0;
    std::memcpy(&n, bytes.data() + 4, 4);
    std::memcpy(&N, bytes.data() + 8, 4);
    double h = 0;
    std::memcpy(&h, bytes.data() + 12, 8);
    EXPECT_EQ(n, 1u);
    EXPECT_EQ(N, 4u);
    EXPECT_EQ(h, 0.5);
    EXPECT_EQ(static_cast<unsigned char>(bytes[20]), 1u);
}

TEST(Mgf1, EmptyFileIsBadMagic) { EXPECT_EQ(decode_error(""), ErrorCode::BadMagic); }

TEST(Mgf1, WrongMagic) { EXPECT_EQ(decode_error("MGF2aaaaaaaaaaaa"), ErrorCode::BadMagic); }

TEST(Mgf1, NonPowerOfTwoAxis) {
    io::Mgf1Data d;
    d.axes = {7};
    d.values.assign(7, 0.0);
    EXPECT_EQ(decode_error(io::encode_mgf1(d)), ErrorCode::NonPowerOfTwo);
}

TEST(Mgf1, TruncatedPayload) {
    const GridFunction f(GridSpec(1, 8, 1.0), std::vector<double>(8, 1.0), SupportTag::Periodic);
    auto bytes = io::encode_grid(f);
    bytes.resize(bytes.size() - 3);
    EXPECT_EQ(decode_error(bytes), ErrorCode::Truncated);
    EXPECT_EQ(decode_error(bytes.substr(0, 10)), ErrorCode::Truncated);
}

TEST(Mgf1, BadSupportTag) {
    const GridFunction f(GridSpec(1, 2, 1.0), std::vector<double>(2, 1.0), SupportTag::Periodic);
    auto bytes = io::encode_grid(f);
    bytes[20] = 7;
    EXPECT_EQ(decode_error(bytes), ErrorCode::InvalidArgument);
}

TEST(Mgf1, MissingFile) {
    try {
        io::read_grid("/nonexistent/dir/file.mgf");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IoFailure);
    }
}

TEST(Csv, OneRowPerNode) {
    const GridSpec s(2, 4, 4.0);
    const auto f = sample(s, [](const Point& x) { return x[0] + 10 * x[1]; }, SupportTag::Periodic);
    const auto csv = io::grid_csv(f);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 17);
    EXPECT_EQ(csv.substr(0, 12), "x1,x2,value\n");
    EXPECT_NE(csv.find("\n-2,-1,-12\n"), std::string::npos);
}
