import static org.junit.platform.engine.discovery.DiscoverySelectors.selectMethod;

import java.io.PrintWriter;
import java.io.StringWriter;
import java.nio.charset.StandardCharsets;
import java.util.List;
import org.junit.platform.launcher.Launcher;
import org.junit.platform.launcher.LauncherDiscoveryRequest;
import org.junit.platform.launcher.core.LauncherDiscoveryRequestBuilder;
import org.junit.platform.launcher.core.LauncherFactory;
import org.junit.platform.launcher.listeners.SummaryGeneratingListener;
import org.junit.platform.launcher.listeners.TestExecutionSummary;

/** Runs Class#method arguments in the given order inside one JVM (JUnit Platform). */
public class FlakemendOrderedRun5 {
    public static void main(String[] args) throws Exception {
        Launcher launcher = LauncherFactory.create();
        try (PrintWriter out = new PrintWriter(args[0], StandardCharsets.UTF_8.name())) {
            for (int i = 1; i < args.length; i++) {
                String id = args[i];
                LauncherDiscoveryRequest request = LauncherDiscoveryRequestBuilder.request()
                        .selectors(selectMethod(id)).build();
                SummaryGeneratingListener listener = new SummaryGeneratingListener();
                long start = System.nanoTime();
                launcher.execute(request, listener);
                long millis = (System.nanoTime() - start) / 1000000L;
                TestExecutionSummary summary = listener.getSummary();
                if (summary.getTestsFoundCount() == 0) {
                    out.println(id + "\tNOT_FOUND\t\t\t" + millis);
                    continue;
                }
                List<TestExecutionSummary.Failure> failures = summary.getFailures();
                if (failures.isEmpty()) {
                    out.println(id + "\tPASS\t\t\t" + millis);
                    continue;
                }
                Throwable t = failures.get(0).getException();
                StringWriter trace = new StringWriter();
                t.printStackTrace(new PrintWriter(trace));
                out.println(id + "\tFAIL\t" + esc(String.valueOf(t.getMessage())) + "\t" + esc(trace.toString())
                        + "\t" + millis);
            }
        }
        System.exit(0);
    }

    private static String esc(String s) {
        return s.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n").replace("\r", "\\r");
    }
}
