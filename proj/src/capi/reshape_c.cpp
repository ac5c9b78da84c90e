#include "reshape/reshape.h"

#include <cstring>
#include <memory>
#include <optional>
#include <string>

#include <spdlog/spdlog.h>

#include "reshape/harness.hpp"

struct reshape_experiment {
    reshape::ExperimentConfig config;
    std::optional<reshape::ExperimentResult> result;
};

namespace {

thread_local std::string last_error;

reshape_status fail(reshape_status s, std::string msg) {
    last_error = std::move(msg);
    return s;
}

template <typename F>
reshape_status guard(F&& body) {
    try {
        last_error.clear();
        body();
        return RESHAPE_OK;
    } catch (const reshape::ConfigError& e) {
        return fail(RESHAPE_ERR_CONFIG, e.what());
    } catch (const reshape::RoutingError& e) {
        return fail(RESHAPE_ERR_ROUTING, e.what());
    } catch (const reshape::ProtocolError& e) {
        return fail(RESHAPE_ERR_PROTOCOL, e.what());
    } catch (const reshape::DeadlockError& e) {
        return fail(RESHAPE_ERR_DEADLOCK, e.what());
    } catch (const reshape::InvalidShareError& e) {
        return fail(RESHAPE_ERR_STATE, e.what());
    } catch (const reshape::UnsupportedMergeError& e) {
        return fail(RESHAPE_ERR_STATE, e.what());
    } catch (const std::ios_base::failure& e) {
        return fail(RESHAPE_ERR_IO, e.what());
    } catch (const std::exception& e) {
        return fail(RESHAPE_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(RESHAPE_ERR_INTERNAL, "unknown error");
    }
}

reshape_status need_result(const reshape_experiment* exp) {
    if (!exp) return fail(RESHAPE_ERR_ARGUMENT, "null experiment");
    if (!exp->result) return fail(RESHAPE_ERR_ARGUMENT, "no completed run");
    return RESHAPE_OK;
}

reshape_status make(reshape_experiment** out, reshape::ExperimentConfig config) {
    *out = new reshape_experiment{std::move(config), std::nullopt};
    return RESHAPE_OK;
}

}  // namespace

extern "C" {

const char* reshape_version(void) { return "1.0.0"; }

const char* reshape_last_error(void) { return last_error.c_str(); }

const char* reshape_status_name(reshape_status s) {
    switch (s) {
        case RESHAPE_OK: return "ok";
        case RESHAPE_ERR_ARGUMENT: return "invalid argument";
        case RESHAPE_ERR_CONFIG: return "configuration error";
        case RESHAPE_ERR_ROUTING: return "routing error";
        case RESHAPE_ERR_PROTOCOL: return "protocol error";
        case RESHAPE_ERR_DEADLOCK: return "deadlock";
        case RESHAPE_ERR_STATE: return "state error";
        case RESHAPE_ERR_IO: return "i/o error";
        case RESHAPE_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

reshape_status reshape_set_log_level(const char* level) {
    if (!level) {
        reshape::configure_logging();
        return RESHAPE_OK;
    }
    const std::string l = level;
    if (l == "error") spdlog::set_level(spdlog::level::err);
    else if (l == "info") spdlog::set_level(spdlog::level::info);
    else if (l == "debug") spdlog::set_level(spdlog::level::debug);
    else return fail(RESHAPE_ERR_ARGUMENT, "unknown log level '" + l + "'");
    return RESHAPE_OK;
}

reshape_status reshape_experiment_load(const char* path, reshape_experiment** out) {
    if (!path || !out) return fail(RESHAPE_ERR_ARGUMENT, "null argument");
    *out = nullptr;
    return guard([&] { make(out, reshape::load_config(path)); });
}

reshape_status reshape_experiment_parse(const char* json_text, reshape_experiment** out) {
    if (!json_text || !out) return fail(RESHAPE_ERR_ARGUMENT, "null argument");
    *out = nullptr;
    return guard([&] { make(out, reshape::parse_config(json_text)); });
}

void reshape_experiment_free(reshape_experiment* exp) { delete exp; }

reshape_status reshape_experiment_set(reshape_experiment* exp, const char* field, const char* value) {
    if (!exp || !field || !value) return fail(RESHAPE_ERR_ARGUMENT, "null argument");
    return guard([&] { reshape::apply_override(exp->config, field, value); });
}

reshape_status reshape_experiment_run(reshape_experiment* exp) {
    if (!exp) return fail(RESHAPE_ERR_ARGUMENT, "null experiment");
    return guard([&] {
        exp->result.reset();
        exp->result = reshape::run_experiment(exp->config);
    });
}

reshape_status reshape_experiment_compare(reshape_experiment* exp, const char* baseline) {
    if (!exp || !baseline) return fail(RESHAPE_ERR_ARGUMENT, "null argument");
    return guard([&] {
        exp->result.reset();
        exp->result = reshape::compare_experiment(exp->config, reshape::parse_strategy(baseline));
    });
}

reshape_status reshape_experiment_write(const reshape_experiment* exp) {
    if (auto s = need_result(exp)) return s;
    return guard([&] { reshape::write_outputs(exp->config, *exp->result); });
}

reshape_status reshape_result_balancing_ratio(const reshape_experiment* exp, double* out) {
    if (auto s = need_result(exp)) return s;
    if (!out) return fail(RESHAPE_ERR_ARGUMENT, "null output");
    *out = exp->result->avg_balancing_ratio;
    return RESHAPE_OK;
}

reshape_status reshape_result_iterations(const reshape_experiment* exp, int* out) {
    if (auto s = need_result(exp)) return s;
    if (!out) return fail(RESHAPE_ERR_ARGUMENT, "null output");
    *out = exp->result->report.iterations;
    return RESHAPE_OK;
}

reshape_status reshape_result_load_reduction(const reshape_experiment* exp, double* out) {
    if (auto s = need_result(exp)) return s;
    if (!out) return fail(RESHAPE_ERR_ARGUMENT, "null output");
    if (!exp->result->load_reduction) return fail(RESHAPE_ERR_ARGUMENT, "load reduction needs a compare run");
    *out = *exp->result->load_reduction;
    return RESHAPE_OK;
}

reshape_status reshape_result_end_time(const reshape_experiment* exp, int64_t* out) {
    if (auto s = need_result(exp)) return s;
    if (!out) return fail(RESHAPE_ERR_ARGUMENT, "null output");
    *out = exp->result->report.end_time;
    return RESHAPE_OK;
}

reshape_status reshape_result_workers(const reshape_experiment* exp, int32_t* out) {
    if (auto s = need_result(exp)) return s;
    if (!out) return fail(RESHAPE_ERR_ARGUMENT, "null output");
    *out = exp->result->report.workers;
    return RESHAPE_OK;
}

reshape_status reshape_result_received(const reshape_experiment* exp, int32_t worker, uint64_t* out) {
    if (auto s = need_result(exp)) return s;
    if (!out) return fail(RESHAPE_ERR_ARGUMENT, "null output");
    const auto& r = exp->result->report.received;
    if (worker < 0 || static_cast<std::size_t>(worker) >= r.size())
        return fail(RESHAPE_ERR_ARGUMENT, "worker index out of range");
    *out = r[static_cast<std::size_t>(worker)];
    return RESHAPE_OK;
}

reshape_status reshape_result_summary(const reshape_experiment* exp, char* buf, size_t len, size_t* needed) {
    if (auto s = need_result(exp)) return s;
    std::string text;
    if (auto s = guard([&] { text = reshape::summary_json(exp->config, *exp->result); })) return s;
    if (needed) *needed = text.size() + 1;
    if (!buf) return RESHAPE_OK;
    if (len < text.size() + 1) return fail(RESHAPE_ERR_ARGUMENT, "buffer too small");
    std::memcpy(buf, text.c_str(), text.size() + 1);
    return RESHAPE_OK;
}

const char* reshape_experiment_output_dir(const reshape_experiment* exp) {
    return exp ? exp->config.output.c_str() : "";
}

}  // extern "C"
