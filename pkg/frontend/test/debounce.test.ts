import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { debounce } from "../src/debounce.js";

describe("debounce", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  it("coalesces a burst into one trailing call with the last arguments", () => {
    const seen: number[] = [];
    const fn = debounce((v: number) => seen.push(v), 300);
    for (const v of [1, 2, 3, 4, 5]) {
      fn(v);
      vi.advanceTimersByTime(50);
    }
    // 50 ms of the 300 ms window already elapsed inside the loop.
    expect(seen).toEqual([]);
    vi.advanceTimersByTime(249);
    expect(seen).toEqual([]);
    vi.advanceTimersByTime(1);
    expect(seen).toEqual([5]);
  });

  it("fires again for a later burst", () => {
    const seen: number[] = [];
    const fn = debounce((v: number) => seen.push(v), 100);
    fn(1);
    vi.advanceTimersByTime(100);
    fn(2);
    vi.advanceTimersByTime(100);
    expect(seen).toEqual([1, 2]);
  });

  it("cancel drops the pending call", () => {
    const seen: number[] = [];
    const fn = debounce((v: number) => seen.push(v), 100);
    fn(1);
    fn.cancel();
    vi.advanceTimersByTime(500);
    expect(seen).toEqual([]);
    expect(fn.pending()).toBe(false);
  });

  it("flush runs the pending call immediately, once", () => {
    const seen: number[] = [];
    const fn = debounce((v: number) => seen.push(v), 100);
    fn(7);
    fn.flush();
    expect(seen).toEqual([7]);
    vi.advanceTimersByTime(500);
    expect(seen).toEqual([7]);
    fn.flush(); // nothing pending: no-op
    expect(seen).toEqual([7]);
  });

  it("pending reports whether a call is scheduled", () => {
    const fn = debounce(() => undefined, 100);
    expect(fn.pending()).toBe(false);
    fn();
    expect(fn.pending()).toBe(true);
    vi.advanceTimersByTime(100);
    expect(fn.pending()).toBe(false);
  });
});
