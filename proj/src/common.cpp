// SPDX-License-Identifier: Apache-2.0
#include "nextview/common.hpp"

#include <algorithm>
#include <charconv>
#include <thread>

namespace nbv {

void parallel_for(int64_t n, int workers, const std::function<void(int64_t, int64_t)>& body) {
    if (n <= 0) return;
    if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
    workers = static_cast<int>(std::max<int64_t>(1, std::min<int64_t>(workers, n)));
    if (workers == 1) {
        body(0, n);
        return;
    }
    const int64_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        const int64_t begin = static_cast<int64_t>(w) * chunk;
        const int64_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&body, begin, end] { body(begin, end); });
    }
    for (auto& t : pool) t.join();
}

std::string format_number(double value) {
    char buffer[32];
    const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
    return std::string(buffer, result.ptr);
}

}  // namespace nbv
