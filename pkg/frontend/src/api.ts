import type { ModelMeta, WhatifElement, WhatifRequest } from "./types.js";

/**
 * Service client. ``transport`` is injectable for tests; the default uses
 * fetch. What-if submissions queue: at most one request is in flight, and
 * a submission made while one is pending supersedes any earlier waiter.
 */

export type Transport = (path: string, body?: unknown) => Promise<unknown>;

export function fetchTransport(baseUrl: string): Transport {
  return async (path, body) => {
    const response = await fetch(baseUrl + path, body === undefined ? undefined : {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    const payload = await response.json();
    if (!response.ok) {
      throw new Error((payload as { error?: string }).error ?? `HTTP ${response.status}`);
    }
    return payload;
  };
}

export class ServiceClient {
  private transport: Transport;
  private inFlight: Promise<void> | null = null;
  private pending: {
    request: WhatifRequest;
    resolve: (r: WhatifElement[]) => void;
    reject: (e: unknown) => void;
  } | null = null;

  constructor(transport: Transport) {
    this.transport = transport;
  }

  meta(): Promise<ModelMeta> {
    return this.transport("/v1/model/meta") as Promise<ModelMeta>;
  }

  /**
   * Submit a what-if run. If a request is already on the wire the new one
   * waits its turn; only the latest waiter survives (earlier waiters are
   * rejected as superseded).
   */
  whatif(request: WhatifRequest): Promise<WhatifElement[]> {
    return new Promise((resolve, reject) => {
      if (this.pending) {
        this.pending.reject(new Error("superseded by a newer what-if run"));
      }
      this.pending = { request, resolve, reject };
      if (!this.inFlight) {
        this.inFlight = this.drain();
      }
    });
  }

  private async drain(): Promise<void> {
    while (this.pending) {
      const job = this.pending;
      this.pending = null;
      try {
        const result = await this.transport("/v1/whatif", job.request);
        job.resolve(result as WhatifElement[]);
      } catch (error) {
        job.reject(error);
      }
    }
    this.inFlight = null;
  }
}
