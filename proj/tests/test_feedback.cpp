#include <gtest/gtest.h>

#include <random>

#include "bhd/feedback.hpp"

using namespace bhd;

TEST(RawFeedback, ConstantDriveLimit) {
    FeedbackParams p;
    p.c0 = 2.7;
    EXPECT_EQ(raw_feedback(0.0, 0.0, p), 2.7);
    EXPECT_EQ(raw_feedback(5.0, 1.2, p), 2.7);
}

TEST(RawFeedback, AffineLawValue) {
    FeedbackParams p;
    p.c0 = 8.61;
    p.c_s = 2.07;
    p.c_a = 1.77;
    // 8.61 - 2.07*3 - 1.77*(-1)
    EXPECT_NEAR(raw_feedback(2.0, 1.0, p), 4.17, 1e-12);
}

TEST(RawFeedback, SymmetricUnderSiteSwapWhenCaIsZero) {
    FeedbackParams p;
    p.c0 = 3.0;
    p.c_s = 1.1;
    p.c_a = 0.0;
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> unif(0.0, 8.0);
    for (int k = 0; k < 100; ++k) {
        const double n1 = unif(gen), n2 = unif(gen);
        ASSERT_EQ(raw_feedback(n1, n2, p), raw_feedback(n2, n1, p));
    }
}

TEST(ApplyFeedback, ClampsAtUpperBound) {
    FeedbackParams p; // defaults f_min=0.01, f_max=4.0
    ControllerState s{1.0};
    EXPECT_EQ(apply_feedback(4.17, s, 1e-3, p), 4.0);
    EXPECT_EQ(s.prev_f, 4.0);
}

TEST(ApplyFeedback, ClampsAtLowerBound) {
    FeedbackParams p;
    ControllerState s{1.0};
    EXPECT_EQ(apply_feedback(-5.0, s, 1e-3, p), 0.01);
}

TEST(ApplyFeedback, SlewLimitsTowardClampedTarget) {
    FeedbackParams p;
    p.r_max = 0.04;
    ControllerState s{1.0};
    EXPECT_NEAR(apply_feedback(4.0, s, 1e-3, p), 1.00004, 1e-12);
    EXPECT_NEAR(s.prev_f, 1.00004, 1e-12);
}

TEST(ApplyFeedback, OutputStaysInsideBounds) {
    FeedbackParams p;
    p.r_max = 1.7;
    ControllerState s = controller_init(0.0, 0.0, p);
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> unif(-50.0, 50.0);
    for (int k = 0; k < 1000; ++k) {
        const double f = apply_feedback(unif(gen), s, 1e-3, p);
        ASSERT_GE(f, p.f_min);
        ASSERT_LE(f, p.f_max);
    }
}

TEST(ApplyFeedback, ConsecutiveChangesRespectRate) {
    FeedbackParams p;
    p.c0 = 9.0;
    p.c_s = 2.0;
    p.c_a = 2.0;
    p.r_max = 0.04;
    const double dt = 1e-3;
    ControllerState s = controller_init(0.0, 0.0, p);
    double prev = s.prev_f;
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> unif(0.0, 6.0);
    for (int k = 0; k < 2000; ++k) {
        const double f = apply_feedback(raw_feedback(unif(gen), unif(gen), p), s, dt, p);
        ASSERT_LE(std::abs(f - prev), *p.r_max * dt + 1e-12);
        prev = f;
    }
}

TEST(ApplyFeedback, MirrorSymmetryUnderSiteRelabeling) {
    FeedbackParams p;
    p.c0 = 7.5;
    p.c_s = 1.9;
    p.c_a = 2.3;
    FeedbackParams mirrored = p;
    mirrored.c_a = -p.c_a;
    std::mt19937_64 gen(13);
    std::uniform_real_distribution<double> unif(0.0, 10.0);
    for (int k = 0; k < 200; ++k) {
        const double n1 = unif(gen), n2 = unif(gen);
        ASSERT_EQ(raw_feedback(n1, n2, p), raw_feedback(n2, n1, mirrored));
    }
}

TEST(ApplyFeedback, ZeroCoefficientsReproduceConstantDrive) {
    FeedbackParams p;
    p.c0 = 1.5;
    ControllerState s = controller_init(0.0, 0.0, p);
    for (int k = 0; k < 10; ++k)
        ASSERT_EQ(apply_feedback(raw_feedback(double(k), 2.0 * k, p), s, 1e-3, p), 1.5);
}

TEST(ControllerInit, StartsAtClampedRawOrFmin) {
    FeedbackParams p;
    p.c0 = 8.61;
    EXPECT_EQ(controller_init(0.0, 0.0, p).prev_f, 4.0);
    p.slew_start_at_f_min = true;
    EXPECT_EQ(controller_init(0.0, 0.0, p).prev_f, 0.01);
}

TEST(FeedbackParams, ValidatesBounds) {
    FeedbackParams p;
    p.f_min = 2.0;
    p.f_max = 1.0;
    EXPECT_THROW(p.validate(), ArgumentError);
    FeedbackParams q;
    q.r_max = -0.5;
    EXPECT_THROW(q.validate(), ArgumentError);
}
