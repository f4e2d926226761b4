# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled MountainCar rollout kernel.

Mirrors distpg._py_kernels.mc_rollout step for step; the only differences
are accumulation order inside the tiny matrix products, so outputs agree
with the fallback to floating-point noise.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, tanh

cnp.import_array()

DEF MIN_POS = -1.2
DEF MAX_POS = 0.6
DEF MAX_SPEED = 0.07
DEF FORCE = 0.0015
DEF GRAVITY = 0.0025
DEF GOAL_REWARD = 100.0
DEF ENERGY_COEF = 0.1


def mc_rollout(double[:, ::1] pos0, double[:, :, ::1] eps,
               double[:, :, ::1] w1, double[:, ::1] b1,
               double[:, ::1] w2, double[::1] b2,
               double sigma, double[::1] goals):
    cdef Py_ssize_t n_traj = pos0.shape[0]
    cdef Py_ssize_t n = pos0.shape[1]
    cdef Py_ssize_t horizon = eps.shape[1]
    cdef Py_ssize_t hid = w1.shape[1]
    cdef Py_ssize_t ds = 2 * n

    states_arr = np.empty((n_traj, horizon + 1, ds))
    actions_arr = np.empty((n_traj, horizon, n))
    rewards_arr = np.empty((n_traj, horizon, n))
    cdef double[:, :, ::1] states = states_arr
    cdef double[:, :, ::1] actions = actions_arr
    cdef double[:, :, ::1] rewards = rewards_arr

    pos_arr = np.array(pos0, dtype=float, copy=True)
    vel_arr = np.zeros((n_traj, n))
    cdef double[:, ::1] pos = pos_arr
    cdef double[:, ::1] vel = vel_arr

    cdef Py_ssize_t b, t, i, j, k
    cdef double pre, mu, a, a_env, new_vel, new_pos, reward
    cdef bint reached, crossed

    for b in range(n_traj):
        for t in range(horizon):
            # freeze the step-t global state before any car moves
            for i in range(n):
                states[b, t, i] = pos[b, i]
                states[b, t, n + i] = vel[b, i]
            for i in range(n):
                mu = b2[i]
                for j in range(hid):
                    pre = b1[i, j]
                    for k in range(ds):
                        pre += w1[i, j, k] * states[b, t, k]
                    mu += w2[i, j] * tanh(pre)
                a = mu + sigma * eps[b, t, i]
                actions[b, t, i] = a
                a_env = a
                if a_env > 1.0:
                    a_env = 1.0
                elif a_env < -1.0:
                    a_env = -1.0

                reached = pos[b, i] >= goals[i]
                new_vel = vel[b, i] + FORCE * a_env - GRAVITY * cos(3.0 * pos[b, i])
                if new_vel > MAX_SPEED:
                    new_vel = MAX_SPEED
                elif new_vel < -MAX_SPEED:
                    new_vel = -MAX_SPEED
                new_pos = pos[b, i] + new_vel
                if new_pos > MAX_POS:
                    new_pos = MAX_POS
                elif new_pos < MIN_POS:
                    new_pos = MIN_POS
                if new_pos <= MIN_POS and new_vel < 0.0:
                    new_vel = 0.0

                crossed = (not reached) and new_pos >= goals[i]
                if reached:
                    reward = 0.0
                else:
                    reward = -ENERGY_COEF * a_env * a_env
                if crossed:
                    reward += GOAL_REWARD
                rewards[b, t, i] = reward

                if not reached:
                    pos[b, i] = new_pos
                    vel[b, i] = new_vel
        for i in range(n):
            states[b, horizon, i] = pos[b, i]
            states[b, horizon, n + i] = vel[b, i]

    return states_arr, actions_arr, rewards_arr
