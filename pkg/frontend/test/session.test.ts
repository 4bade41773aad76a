import { describe, expect, it } from "vitest";
import { formatCountdown, isExpired, maskPhone, secondsLeft } from "../src/session.js";
import type { PortalSession } from "../src/session.js";

const session = (expiresAt: number): PortalSession => ({
  token: "t",
  role: "subject",
  phoneMasked: "+47••••••01",
  expiresAt,
});

describe("maskPhone", () => {
  it("keeps prefix and last two digits only", () => {
    expect(maskPhone("+4791000001")).toBe("+47••••••01");
  });

  it("never leaks digits of short inputs", () => {
    expect(maskPhone("12345")).toBe("•••••");
    expect(maskPhone("")).toBe("");
  });
});

describe("session expiry", () => {
  it("counts down to zero and flips to expired exactly at the deadline", () => {
    const s = session(1000);
    expect(secondsLeft(s, 880)).toBe(120);
    expect(isExpired(s, 999)).toBe(false);
    expect(isExpired(s, 1000)).toBe(true);
    expect(secondsLeft(s, 2000)).toBe(0);
  });

  it("treats expiresAt 0 as non-expiring (static staff keys)", () => {
    const s = session(0);
    expect(secondsLeft(s, 5)).toBe(Infinity);
    expect(isExpired(s, 5)).toBe(false);
  });
});

describe("formatCountdown", () => {
  it("renders m:ss", () => {
    expect(formatCountdown(125)).toBe("2:05");
    expect(formatCountdown(59)).toBe("0:59");
    expect(formatCountdown(600)).toBe("10:00");
  });

  it("clamps at zero", () => {
    expect(formatCountdown(0)).toBe("0:00");
    expect(formatCountdown(-3)).toBe("0:00");
  });
});
