#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>

namespace imgscan {

// Token bucket limiting sustained request rate. The clock is injectable so
// windowed-rate properties can be tested without wall-clock sleeps.
class TokenBucket {
  public:
    using Clock = std::function<std::chrono::steady_clock::time_point()>;
    using Sleeper = std::function<void(std::chrono::nanoseconds)>;

    explicit TokenBucket(double max_per_second, Clock clock = nullptr, Sleeper sleeper = nullptr);

    // Blocks until a token is available, then consumes it.
    void acquire();

  private:
    double max_per_second_;
    double tokens_;
    std::chrono::steady_clock::time_point last_refill_;
    Clock clock_;
    Sleeper sleeper_;
    std::mutex mu_;
};

// Bounds concurrent transfers per endpoint.
class TransferGate {
  public:
    explicit TransferGate(unsigned max_concurrent) : max_(max_concurrent == 0 ? 1 : max_concurrent) {}

    void enter() {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return active_ < max_; });
        ++active_;
    }

    void leave() {
        std::lock_guard lk(mu_);
        --active_;
        cv_.notify_one();
    }

    class Scoped {
      public:
        explicit Scoped(TransferGate& gate) : gate_(gate) { gate_.enter(); }
        ~Scoped() { gate_.leave(); }
        Scoped(const Scoped&) = delete;
        Scoped& operator=(const Scoped&) = delete;

      private:
        TransferGate& gate_;
    };

  private:
    unsigned max_;
    unsigned active_ = 0;
    std::mutex mu_;
    std::condition_variable cv_;
};

}  // namespace imgscan
