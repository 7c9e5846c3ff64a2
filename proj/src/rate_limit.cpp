#include "imgscan/rate_limit.hpp"

#include <algorithm>

namespace imgscan {

TokenBucket::TokenBucket(double max_per_second, Clock clock, Sleeper sleeper)
    : max_per_second_(max_per_second > 0 ? max_per_second : 1.0),
      tokens_(max_per_second_ >= 1.0 ? 1.0 : max_per_second_),
      clock_(clock ? std::move(clock) : [] { return std::chrono::steady_clock::now(); }),
      sleeper_(sleeper ? std::move(sleeper)
                       : [](std::chrono::nanoseconds d) { std::this_thread::sleep_for(d); }) {
    last_refill_ = clock_();
}

void TokenBucket::acquire() {
    while (true) {
        std::chrono::nanoseconds wait{};
        {
            std::lock_guard lk(mu_);
            auto now = clock_();
            double elapsed = std::chrono::duration<double>(now - last_refill_).count();
            last_refill_ = now;
            tokens_ = std::min(max_per_second_, tokens_ + elapsed * max_per_second_);
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            double missing = 1.0 - tokens_;
            wait = std::chrono::nanoseconds(
                static_cast<long long>(missing / max_per_second_ * 1e9) + 1);
        }
        sleeper_(wait);
    }
}

}  // namespace imgscan
