// Exercises the shared library through its C header only.
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "reshape/reshape.h"

namespace {

const char* kConfig = R"({
  "workflow": "join",
  "workers": 2,
  "source_rate": 20,
  "service_rate": 6,
  "generators": [{"kind": "fixed", "key_count": 2, "total": 4000, "weights": {"0": 0.8, "1": 0.2}}],
  "strategy": {"kind": "reshape-sbr", "tau": 50, "eta": 50}
})";

struct Handle {
    reshape_experiment* p = nullptr;
    ~Handle() { reshape_experiment_free(p); }
};

}  // namespace

TEST(CApi, RunAndQuery) {
    ASSERT_EQ(reshape_set_log_level("error"), RESHAPE_OK);
    Handle h;
    ASSERT_EQ(reshape_experiment_parse(kConfig, &h.p), RESHAPE_OK) << reshape_last_error();
    ASSERT_EQ(reshape_experiment_run(h.p), RESHAPE_OK) << reshape_last_error();

    int iterations = -1;
    double ratio = -1;
    int32_t workers = 0;
    int64_t end = 0;
    uint64_t r0 = 0, r1 = 0;
    EXPECT_EQ(reshape_result_iterations(h.p, &iterations), RESHAPE_OK);
    EXPECT_EQ(reshape_result_balancing_ratio(h.p, &ratio), RESHAPE_OK);
    EXPECT_EQ(reshape_result_workers(h.p, &workers), RESHAPE_OK);
    EXPECT_EQ(reshape_result_end_time(h.p, &end), RESHAPE_OK);
    EXPECT_EQ(reshape_result_received(h.p, 0, &r0), RESHAPE_OK);
    EXPECT_EQ(reshape_result_received(h.p, 1, &r1), RESHAPE_OK);
    EXPECT_GT(iterations, 0);
    EXPECT_GT(ratio, 0.0);
    EXPECT_LE(ratio, 1.0);
    EXPECT_EQ(workers, 2);
    EXPECT_GT(end, 0);
    EXPECT_EQ(r0 + r1, 4000u);
    EXPECT_EQ(reshape_result_received(h.p, 2, &r0), RESHAPE_ERR_ARGUMENT);

    double lr = 0;
    EXPECT_EQ(reshape_result_load_reduction(h.p, &lr), RESHAPE_ERR_ARGUMENT);
    ASSERT_EQ(reshape_experiment_compare(h.p, "none"), RESHAPE_OK);
    EXPECT_EQ(reshape_result_load_reduction(h.p, &lr), RESHAPE_OK);
    EXPECT_GT(lr, 0.0);
}

TEST(CApi, SummaryBufferProtocol) {
    Handle h;
    ASSERT_EQ(reshape_experiment_parse(kConfig, &h.p), RESHAPE_OK);
    size_t need = 0;
    EXPECT_EQ(reshape_result_summary(h.p, nullptr, 0, &need), RESHAPE_ERR_ARGUMENT);
    ASSERT_EQ(reshape_experiment_run(h.p), RESHAPE_OK);
    ASSERT_EQ(reshape_result_summary(h.p, nullptr, 0, &need), RESHAPE_OK);
    ASSERT_GT(need, 1u);
    std::string small(need - 1, '\0');
    EXPECT_EQ(reshape_result_summary(h.p, small.data(), small.size(), &need), RESHAPE_ERR_ARGUMENT);
    std::string buf(need, '\0');
    ASSERT_EQ(reshape_result_summary(h.p, buf.data(), buf.size(), &need), RESHAPE_OK);
    EXPECT_NE(std::strstr(buf.c_str(), "\"avg_balancing_ratio\""), nullptr);
}

TEST(CApi, OverridesAndWrite) {
    Handle h;
    ASSERT_EQ(reshape_experiment_parse(kConfig, &h.p), RESHAPE_OK);
    const auto dir = std::filesystem::temp_directory_path() / "reshape_capi_out";
    std::filesystem::remove_all(dir);
    EXPECT_EQ(reshape_experiment_set(h.p, "out", dir.c_str()), RESHAPE_OK);
    EXPECT_EQ(reshape_experiment_set(h.p, "strategy", "reshape-sbk"), RESHAPE_OK);
    EXPECT_EQ(reshape_experiment_set(h.p, "tau", "x"), RESHAPE_ERR_CONFIG);
    EXPECT_EQ(reshape_experiment_set(h.p, "nope", "1"), RESHAPE_ERR_CONFIG);
    EXPECT_EQ(reshape_experiment_write(h.p), RESHAPE_ERR_ARGUMENT);
    ASSERT_EQ(reshape_experiment_run(h.p), RESHAPE_OK);
    ASSERT_EQ(reshape_experiment_write(h.p), RESHAPE_OK);
    EXPECT_STREQ(reshape_experiment_output_dir(h.p), dir.c_str());
    for (const char* f : {"metrics.csv", "iterations.csv", "summary.json"})
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
}

TEST(CApi, ErrorsCarryMessages) {
    reshape_experiment* p = nullptr;
    EXPECT_EQ(reshape_experiment_parse("{\"workers\": 0}", &p), RESHAPE_ERR_CONFIG);
    EXPECT_EQ(p, nullptr);
    EXPECT_GT(std::strlen(reshape_last_error()), 0u);
    EXPECT_EQ(reshape_experiment_load("/no/such/file.json", &p), RESHAPE_ERR_CONFIG);
    EXPECT_EQ(reshape_experiment_parse(nullptr, &p), RESHAPE_ERR_ARGUMENT);
    EXPECT_EQ(reshape_experiment_run(nullptr), RESHAPE_ERR_ARGUMENT);
    EXPECT_EQ(reshape_set_log_level("verbose"), RESHAPE_ERR_ARGUMENT);
    EXPECT_STREQ(reshape_status_name(RESHAPE_ERR_DEADLOCK), "deadlock");
    EXPECT_STRNE(reshape_version(), "");
    reshape_experiment_free(nullptr);
}
