#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "modio/bench.hpp"
#include "modio/builders.hpp"

using namespace modio;

namespace {

std::string sweep_csv(const Scenario& s, const LoadSpec& l) {
    std::ostringstream os;
    const auto rep = run_sweep(s, l);
    write_csv(os, rep.rows, rep.cores, false);
    return os.str();
}

LoadSpec short_load(std::vector<double> rates) {
    LoadSpec l;
    l.rates_mbps = std::move(rates);
    l.duration_s = 0.2;
    l.warmup_s = 0.05;
    return l;
}

} // namespace

TEST(Percentiles, EqualValues) {
    auto p = rtt_percentiles(std::vector<double>(200, 7.5));
    ASSERT_FALSE(p.insufficient);
    EXPECT_EQ(*p.p50, 7.5);
    EXPECT_EQ(*p.p99, 7.5);
}

TEST(Percentiles, NearestRankOnOneToHundred) {
    std::vector<double> v(100);
    std::iota(v.rbegin(), v.rend(), 1.0);  // order must not matter
    auto p = rtt_percentiles(v);
    EXPECT_EQ(*p.p50, 50.0);
    EXPECT_EQ(*p.p99, 99.0);
}

TEST(Percentiles, TooFewSamples) {
    auto p = rtt_percentiles(std::vector<double>(99, 1.0));
    EXPECT_TRUE(p.insufficient);
    EXPECT_FALSE(p.p50);
    EXPECT_FALSE(p.p99);
    EXPECT_TRUE(rtt_percentiles({}).insufficient);
}

TEST(Csv, EmptySweepIsHeaderOnly) {
    std::ostringstream os;
    write_csv(os, {}, 2, false);
    EXPECT_EQ(os.str(),
              "applied_mbps,achieved_mbps,util_core0,util_core1,rtt_p50_us,rtt_p99_us,drops,"
              "invalid_descriptors,avg_batch\n");
    std::istringstream in(os.str());
    auto rep = parse_sweep_csv(in);
    EXPECT_EQ(rep.cores, 2);
    EXPECT_TRUE(rep.rows.empty());
}

TEST(Csv, ParsesBackWhatItWrote) {
    EchoOptions o;
    const auto text = sweep_csv(echo_scenario(o), short_load({100, 400}));
    std::istringstream in(text);
    auto rep = parse_sweep_csv(in);
    ASSERT_EQ(rep.rows.size(), 2u);
    EXPECT_EQ(rep.cores, 1);
    EXPECT_NEAR(rep.rows[0].applied_mbps, 100.0, 1.0);
    EXPECT_NEAR(rep.rows[1].applied_mbps, 400.0, 4.0);
    EXPECT_TRUE(rep.rows[1].rtt_p50_us);
    std::ostringstream again;
    write_csv(again, rep.rows, rep.cores, false);
    EXPECT_EQ(again.str(), text);
}

TEST(Csv, RejectsForeignInput) {
    std::istringstream bad("a,b,c\n1,2,3\n");
    EXPECT_THROW(parse_sweep_csv(bad), ConfigError);
    std::istringstream empty("");
    EXPECT_THROW(parse_sweep_csv(empty), ConfigError);
}

TEST(Load, ParseRates) {
    EXPECT_EQ(parse_rates("100:300:100"), (std::vector<double>{100, 200, 300}));
    EXPECT_EQ(parse_rates("100:1000:300"), (std::vector<double>{100, 400, 700, 1000}));
    EXPECT_EQ(parse_rates("50"), (std::vector<double>{50}));
    for (const char* bad : {"1:2", "a:b:c", "3:1:1", "1:2:0", "", "1:2:3:4"}) {
        EXPECT_THROW(parse_rates(bad), ConfigError) << bad;
    }
}

TEST(Load, CheckLoadInvariants) {
    EXPECT_NO_THROW(check_load(short_load({10, 20})));
    EXPECT_THROW(check_load(short_load({20, 10})), ConfigError);
    EXPECT_THROW(check_load(short_load({0, 10})), ConfigError);
    auto l = short_load({10});
    l.warmup_s = l.duration_s;
    EXPECT_THROW(check_load(l), ConfigError);
}

TEST(Sweep, SameSeedSameBytes) {
    EchoOptions o;
    o.clients = 2;
    o.spread = true;
    const auto s = echo_scenario(o);
    const auto l = short_load({200, 900});
    EXPECT_EQ(sweep_csv(s, l), sweep_csv(s, l));
}

TEST(Sweep, ScalesEveryFlowToTheAppliedRate) {
    EchoOptions o;
    o.clients = 2;
    o.spread = true;
    std::vector<RunResult> runs;
    auto rep = run_sweep(echo_scenario(o), short_load({300}), &runs);
    ASSERT_EQ(runs.size(), 1u);
    EXPECT_NEAR(runs[0].summary.client_mbps[0], 150.0, 1.5);
    EXPECT_NEAR(runs[0].summary.client_mbps[1], 150.0, 1.5);
    EXPECT_NEAR(rep.rows[0].achieved_mbps, 300.0, 3.0);
}
